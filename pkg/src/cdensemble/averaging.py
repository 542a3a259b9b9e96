"""Connection counting and the two model-averaging procedures.

The expert-guided procedure walks variable pairs in order of decreasing
connection count. A pair enters the consensus only if enough models
propose it (edge threshold) and, below a strict majority, the expert does
not veto it. Orientation goes to a dominant direction when one clears the
orientation threshold, to the single cycle-safe direction when only one
exists, and to the expert otherwise. The greedy count-ordered baseline
works on directed counts alone.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .experts import (
    EXISTENCE,
    ORIENTATION,
    Expert,
    ExpertAnswer,
    ExpertError,
    ExpertQuery,
    QueryContext,
    record_from_answer,
)
from .graphs import Dag, Mark, MixedGraph, VariableSet

TIE_LEXICOGRAPHIC = "lexicographic"
TIE_SHUFFLE = "shuffle"


@dataclass(frozen=True)
class AveragingConfig:
    theta1: float = 0.0
    theta2: float = 0.7
    tie_break: str = TIE_LEXICOGRAPHIC
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.theta1 <= 1.0:
            raise ValueError("theta1 must lie in [0, 1]")
        if not 0.0 <= self.theta2 <= 1.0:
            raise ValueError("theta2 must lie in [0, 1]")
        if self.tie_break not in (TIE_LEXICOGRAPHIC, TIE_SHUFFLE):
            raise ValueError(f"unknown tie break {self.tie_break!r}")


@dataclass
class EnsembleCounts:
    """Connection and orientation tallies over a model set.

    ``connection`` is keyed on normalized (min id, max id) pairs and counts
    models with any edge on the pair; ``oriented`` is keyed on ordered
    pairs and counts models with that exact directed edge. Undirected and
    bidirected edges contribute to connection counts only.
    """

    variables: VariableSet
    n: int
    connection: dict[tuple[int, int], int]
    oriented: dict[tuple[int, int], int]

    def connection_count(self, x: int, y: int) -> int:
        return self.connection.get((min(x, y), max(x, y)), 0)

    def oriented_count(self, x: int, y: int) -> int:
        return self.oriented.get((x, y), 0)

    def connection_share(self, x: int, y: int) -> Fraction:
        return Fraction(self.connection_count(x, y), self.n)


def connection_counts(models: list[MixedGraph]) -> EnsembleCounts:
    if not models:
        raise ValueError("need at least one model to count over")
    variables = models[0].variables
    for index, model in enumerate(models):
        if model.variables != variables:
            raise ValueError(f"model {index} uses a different variable set")
    connection: dict[tuple[int, int], int] = {}
    oriented: dict[tuple[int, int], int] = {}
    for model in models:
        for mark, source, target in model.edges():
            key = (min(source, target), max(source, target))
            connection[key] = connection.get(key, 0) + 1
            if mark is Mark.DIRECTED:
                oriented[(source, target)] = oriented.get((source, target), 0) + 1
    return EnsembleCounts(variables, len(models), connection, oriented)


@dataclass
class PairDecision:
    """Everything decided about one variable pair during averaging."""

    x: int
    y: int
    count: int
    skipped_by_theta1: bool = False
    existence: Optional[ExpertAnswer] = None
    both_orientations_valid: Optional[bool] = None
    theta2_branch: Optional[str] = None  # "xy", "yx" or "expert"
    orientation: Optional[ExpertAnswer] = None
    edge_added: Optional[tuple[int, int]] = None


@dataclass
class AveragingTrace:
    """Replayable record of one averaging run."""

    variables: VariableSet
    n_models: int
    config: AveragingConfig
    decisions: list[PairDecision] = field(default_factory=list)

    def expert_transcript(self) -> list[dict]:
        """Expert calls in invocation order, as scripted-expert records."""
        records = []
        for decision in self.decisions:
            for kind, answer in ((EXISTENCE, decision.existence),
                                 (ORIENTATION, decision.orientation)):
                if answer is not None:
                    query = ExpertQuery(kind, decision.x, decision.y, self.variables)
                    records.append(record_from_answer(query, answer))
        return records

    def to_json(self) -> dict:
        names = self.variables
        decisions = []
        for d in self.decisions:
            entry: dict = {
                "pair": [names[d.x].name, names[d.y].name],
                "count": d.count,
                "skipped_by_theta1": d.skipped_by_theta1,
                "both_orientations_valid": d.both_orientations_valid,
                "theta2_branch": d.theta2_branch,
                "existence": None,
                "orientation": None,
                "edge_added": None,
            }
            if d.existence is not None:
                entry["existence"] = {
                    "accept": d.existence.accept,
                    "provenance": d.existence.provenance,
                }
            if d.orientation is not None:
                entry["orientation"] = {
                    "parent": names[d.orientation.parent].name,
                    "child": names[d.orientation.child].name,
                    "provenance": d.orientation.provenance,
                }
            if d.edge_added is not None:
                entry["edge_added"] = [names[d.edge_added[0]].name,
                                       names[d.edge_added[1]].name]
            decisions.append(entry)
        return {
            "variables": list(names.names),
            "n_models": self.n_models,
            "theta1": self.config.theta1,
            "theta2": self.config.theta2,
            "tie_break": self.config.tie_break,
            "seed": self.config.seed,
            "decisions": decisions,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "AveragingTrace":
        variables = VariableSet.from_names(doc["variables"])
        config = AveragingConfig(doc["theta1"], doc["theta2"],
                                 doc.get("tie_break", TIE_LEXICOGRAPHIC),
                                 doc.get("seed", 0))
        trace = cls(variables, doc["n_models"], config)
        from .experts import existence_answer, orientation_answer  # local: tiny helpers

        for entry in doc["decisions"]:
            x, y = (variables.id_of(n) for n in entry["pair"])
            decision = PairDecision(
                x, y, entry["count"],
                skipped_by_theta1=entry["skipped_by_theta1"],
                both_orientations_valid=entry["both_orientations_valid"],
                theta2_branch=entry["theta2_branch"],
            )
            if entry["existence"] is not None:
                decision.existence = existence_answer(
                    entry["existence"]["accept"], entry["existence"]["provenance"])
            if entry["orientation"] is not None:
                decision.orientation = orientation_answer(
                    variables.id_of(entry["orientation"]["parent"]),
                    variables.id_of(entry["orientation"]["child"]),
                    entry["orientation"]["provenance"])
            if entry["edge_added"] is not None:
                decision.edge_added = tuple(variables.id_of(n) for n in entry["edge_added"])
            trace.decisions.append(decision)
        return trace

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.to_json(), handle, indent=2, sort_keys=True)
            handle.write("\n")

    @classmethod
    def load(cls, path) -> "AveragingTrace":
        with open(path, encoding="utf-8") as handle:
            return cls.from_json(json.load(handle))


def _pair_order(counts: EnsembleCounts, config: AveragingConfig) -> list[tuple[int, int]]:
    """Pairs with nonzero counts, most-supported first.

    Ties are broken by the sorted variable-name pair, or by a seeded
    shuffle ahead of a stable sort when ordering sensitivity is under
    study.
    """
    names = counts.variables
    pairs = [pair for pair, count in counts.connection.items() if count > 0]
    if config.tie_break == TIE_SHUFFLE:
        pairs.sort(key=lambda p: tuple(sorted((names[p[0]].name, names[p[1]].name))))
        random.Random(config.seed).shuffle(pairs)
        pairs.sort(key=lambda p: -counts.connection[p])
    else:
        pairs.sort(key=lambda p: (-counts.connection[p],
                                  tuple(sorted((names[p[0]].name, names[p[1]].name)))))
    return pairs


def _ask(expert: Expert, query: ExpertQuery) -> ExpertAnswer:
    try:
        answer = expert.answer(query)
    except ExpertError as exc:
        raise type(exc)(f"{query.describe()} failed: {exc}") from exc
    if query.kind == ORIENTATION and {answer.parent, answer.child} != {query.x, query.y}:
        raise ExpertError(f"{query.describe()} answered outside the pair")
    return answer


def expert_model_average(
    models: list[MixedGraph],
    config: AveragingConfig,
    expert: Expert,
) -> tuple[Dag, AveragingTrace]:
    """Build a consensus DAG from candidate models and an expert.

    Pairs are processed once each, in decreasing connection-count order.
    Threshold comparisons are exact (fractions), so a share sitting on a
    grid point passes a ``>=`` gate.
    """
    counts = connection_counts(models)
    variables = counts.variables
    n = counts.n
    theta1 = Fraction(config.theta1)
    theta2 = Fraction(config.theta2)
    half = Fraction(1, 2)

    dag = Dag(variables)
    trace = AveragingTrace(variables, n, config)

    for x, y in _pair_order(counts, config):
        c = counts.connection[(x, y)]
        decision = PairDecision(x, y, c)
        trace.decisions.append(decision)
        share = Fraction(c, n)
        if share < theta1:
            decision.skipped_by_theta1 = True
            continue
        context = QueryContext(c, n, counts.oriented_count(x, y), counts.oriented_count(y, x))
        if share <= half:
            answer = _ask(expert, ExpertQuery(EXISTENCE, x, y, variables, context))
            decision.existence = answer
            if not answer.accept:
                continue
        xy_ok = not dag.edge_creates_cycle(x, y)
        yx_ok = not dag.edge_creates_cycle(y, x)
        decision.both_orientations_valid = xy_ok and yx_ok
        if xy_ok and yx_ok:
            if Fraction(counts.oriented_count(x, y), c) >= theta2:
                decision.theta2_branch = "xy"
                decision.edge_added = (x, y)
            elif Fraction(counts.oriented_count(y, x), c) >= theta2:
                decision.theta2_branch = "yx"
                decision.edge_added = (y, x)
            else:
                decision.theta2_branch = "expert"
                answer = _ask(expert, ExpertQuery(ORIENTATION, x, y, variables, context))
                decision.orientation = answer
                decision.edge_added = answer.oriented_pair()
        elif xy_ok:
            decision.edge_added = (x, y)
        elif yx_ok:
            decision.edge_added = (y, x)
        # neither direction cycle-safe: fall through, nothing added
        if decision.edge_added is not None:
            dag.add_edge(*decision.edge_added)
    return dag, trace


def bayesys_model_average(models: list[MixedGraph], min_count: int = 1) -> Dag:
    """Greedy baseline: add directed edges by descending count, skipping
    cycles and antiparallel duplicates. Only directed candidate edges
    count; ties break on the ordered name pair."""
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    counts = connection_counts(models)
    names = counts.variables
    candidates = [(pair, count) for pair, count in counts.oriented.items()
                  if count >= min_count]
    candidates.sort(key=lambda item: (-item[1],
                                      (names[item[0][0]].name, names[item[0][1]].name)))
    dag = Dag(names)
    for (x, y), _count in candidates:
        if dag.has_edge(y, x):
            continue
        if dag.edge_creates_cycle(x, y):
            continue
        dag.add_edge(x, y)
    return dag
