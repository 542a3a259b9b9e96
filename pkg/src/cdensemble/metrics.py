"""Graphical-accuracy scoring with fractional partial matches.

A predicted edge on a true pair scores a full true positive only when its
mark matches exactly (same direction for directed edges); any other edge
on that pair is half a true positive plus half a false negative, and a
miss is a full false negative. Pairs unconnected in the truth yield one
false positive per predicted edge. All counts are exact rationals so
half-integer scores survive aggregation untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from statistics import mean, stdev
from typing import Optional

from .graphs import Mark, MixedGraph

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: Fraction
    fp: Fraction
    fn: Fraction
    tn: Fraction
    a: int  # ground-truth connections
    i: int  # ground-truth independencies: V(V-1)/2 - a


@dataclass(frozen=True)
class MetricsReport:
    bsf: Fraction
    shd: Fraction
    f1: Optional[Fraction]  # None only under invalid_f1="exclude"
    precision: Optional[Fraction]  # None when the prediction has no edges
    recall: Fraction
    confusion: ConfusionCounts
    expert_calls: Optional[dict] = None

    @property
    def precision_valid(self) -> bool:
        return self.precision is not None

    def to_dict(self) -> dict:
        doc = {
            "bsf": float(self.bsf),
            "shd": float(self.shd),
            "f1": float(self.f1) if self.f1 is not None else None,
            "precision": float(self.precision) if self.precision is not None else None,
            "precision_valid": self.precision_valid,
            "recall": float(self.recall),
            "tp": float(self.confusion.tp),
            "fp": float(self.confusion.fp),
            "fn": float(self.confusion.fn),
            "tn": float(self.confusion.tn),
            "a": self.confusion.a,
            "i": self.confusion.i,
        }
        if self.expert_calls is not None:
            doc["expert_calls"] = dict(self.expert_calls)
        return doc


def confusion(truth: MixedGraph, predicted: MixedGraph) -> ConfusionCounts:
    if truth.variables != predicted.variables:
        raise ValueError("truth and prediction use different variable sets")
    tp = fp = fn = tn = Fraction(0)
    a = 0
    size = len(truth.variables)
    for x in range(size):
        for y in range(x + 1, size):
            true_edge = truth.edge_between(x, y)
            pred_edge = predicted.edge_between(x, y)
            if true_edge is None:
                if pred_edge is None:
                    tn += 1
                else:
                    fp += 1
                continue
            a += 1
            if pred_edge is None:
                fn += 1
            elif _full_match(true_edge, pred_edge):
                tp += 1
            else:
                tp += HALF
                fn += HALF
    independencies = size * (size - 1) // 2 - a
    return ConfusionCounts(tp, fp, fn, tn, a, independencies)


def _full_match(true_edge, pred_edge) -> bool:
    true_mark, ts, tt = true_edge
    pred_mark, ps, pt = pred_edge
    if true_mark is not pred_mark:
        return False
    if true_mark is Mark.DIRECTED:
        return (ts, tt) == (ps, pt)
    return True  # marks equal and symmetric


def score(
    counts: ConfusionCounts,
    expert_calls: Optional[dict] = None,
    invalid_f1: str = "zero",
) -> MetricsReport:
    """Turn confusion counts into the metric suite.

    An edgeless prediction has undefined precision; its F1 defaults to 0 so
    batch aggregates stay finite (``invalid_f1="exclude"`` reports F1 as
    undefined too, for callers that drop such runs from aggregates).
    """
    if counts.a < 1:
        raise ValueError("ground truth has no edges; scores are undefined")
    if invalid_f1 not in ("zero", "exclude"):
        raise ValueError("invalid_f1 must be 'zero' or 'exclude'")
    tp, fp, fn, tn = counts.tp, counts.fp, counts.fn, counts.tn
    a, i = counts.a, counts.i

    recall = tp / a
    precision = tp / (tp + fp) if tp + fp > 0 else None
    if precision is None:
        f1 = Fraction(0) if invalid_f1 == "zero" else None
    elif precision + recall == 0:
        f1 = Fraction(0)
    else:
        f1 = 2 * precision * recall / (precision + recall)

    if i > 0:
        bsf = HALF * (tp / a + tn / i - fp / i - fn / a)
    else:
        # Complete ground truth: no independencies to recover, so the
        # independence terms are vacuously perfect.
        bsf = HALF * (tp / a + 1 - fn / a)
    shd = fp + fn
    return MetricsReport(bsf, shd, f1, precision, recall, counts, expert_calls)


def score_graphs(truth: MixedGraph, predicted: MixedGraph, **kwargs) -> MetricsReport:
    return score(confusion(truth, predicted), **kwargs)


def score_batch(
    truth: MixedGraph,
    predictions: list[MixedGraph],
    labels: Optional[list[str]] = None,
) -> tuple[list[MetricsReport], dict]:
    """Score every prediction and aggregate mean/std per metric.

    Graphs with undefined precision are excluded from the precision
    aggregate and counted in ``invalid_precision_count``; their F1 enters
    the aggregate as 0.
    """
    if not predictions:
        raise ValueError("need at least one prediction to score")
    if labels is not None and len(labels) != len(predictions):
        raise ValueError("labels must match predictions one to one")
    reports = [score_graphs(truth, p) for p in predictions]

    def aggregate(values: list[float]) -> dict:
        return {"mean": mean(values), "std": stdev(values) if len(values) > 1 else 0.0}

    summary = {
        metric: aggregate([float(getattr(r, metric)) for r in reports])
        for metric in ("bsf", "shd", "f1", "recall")
    }
    valid = [float(r.precision) for r in reports if r.precision is not None]
    summary["precision"] = aggregate(valid) if valid else {"mean": math.nan, "std": math.nan}
    summary["invalid_precision_count"] = len(reports) - len(valid)
    if labels is not None:
        summary["labels"] = list(labels)
    return reports, summary
