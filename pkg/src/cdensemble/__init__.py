"""Expert-guided model averaging for causal discovery ensembles."""

from .averaging import (
    AveragingConfig,
    AveragingTrace,
    EnsembleCounts,
    bayesys_model_average,
    connection_counts,
    expert_model_average,
)
from .experts import (
    AnswerCache,
    CachedExpert,
    ConsistencyWrapper,
    Expert,
    ExpertAnswer,
    ExpertQuery,
    KeyedTranscriptExpert,
    ScriptedExpert,
    SimulatedExpert,
    count_expert_calls,
)
from .graphs import CycleError, Dag, GroundTruth, Mark, MixedGraph, Variable, VariableSet
from .metrics import ConfusionCounts, MetricsReport, confusion, score, score_batch, score_graphs

__all__ = [
    "AnswerCache",
    "AveragingConfig",
    "AveragingTrace",
    "CachedExpert",
    "ConfusionCounts",
    "ConsistencyWrapper",
    "connection_counts",
    "count_expert_calls",
    "CycleError",
    "Dag",
    "EnsembleCounts",
    "Expert",
    "ExpertAnswer",
    "ExpertQuery",
    "KeyedTranscriptExpert",
    "GroundTruth",
    "Mark",
    "MetricsReport",
    "MixedGraph",
    "ScriptedExpert",
    "SimulatedExpert",
    "Variable",
    "VariableSet",
    "bayesys_model_average",
    "confusion",
    "expert_model_average",
    "score",
    "score_batch",
    "score_graphs",
]

__version__ = "0.1.0"
