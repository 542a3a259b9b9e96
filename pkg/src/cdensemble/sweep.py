"""Grid sweeps over thresholds, expert correctness, and seeds.

Each cell of the grid runs one averaging pass, scores it against the truth
when one is configured, and appends a CSV row. Sweeps are resumable: rows
already present in the output are never recomputed, so re-running a
finished sweep is a no-op.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean, stdev
from typing import Optional

from .averaging import AveragingConfig, connection_counts, expert_model_average
from .experts import (
    AnswerCache,
    CachedExpert,
    ConsistencyWrapper,
    KeyedTranscriptExpert,
    SimulatedExpert,
    count_expert_calls,
)
from .graph_io import PerturbationSpec, load_variables, parse_graph_file, perturb
from .graphs import GroundTruth, MixedGraph
from .metrics import score_graphs

RESULT_COLUMNS = [
    "network", "n_models", "theta1", "theta2", "correctness", "seed",
    "bsf", "shd", "f1", "precision", "recall", "precision_valid",
    "existence_calls", "orientation_calls", "wallclock_ms", "error",
]


@dataclass
class RunConfig:
    """One sweep definition, usually loaded from a JSON config file."""

    network: str
    output_dir: Path
    truth_path: Optional[Path] = None
    model_paths: list[Path] = field(default_factory=list)
    variables_path: Optional[Path] = None
    generator: Optional[dict] = None  # rates + model_count for perturb()
    expert: dict = field(default_factory=lambda: {"kind": "simulated"})
    tie_break: str = "lexicographic"
    theta1_grid: list[float] = field(default_factory=lambda: [0.0])
    theta2_grid: list[float] = field(default_factory=lambda: [0.7])
    correctness_grid: list[Optional[float]] = field(default_factory=lambda: [None])
    seeds: list[int] = field(default_factory=lambda: [0])

    @classmethod
    def from_json(cls, doc: dict, base_dir: Path = Path(".")) -> "RunConfig":
        def resolve(value):
            return base_dir / value if value is not None else None

        grid = doc.get("grid", {})
        expert = doc.get("expert", {"kind": "simulated"})
        correctness = grid.get("correctness")
        if correctness is None:
            default = expert.get("correctness") if expert.get("kind") == "simulated" else None
            correctness = [default]
        config = cls(
            network=doc.get("network", "unnamed"),
            output_dir=resolve(doc.get("output_dir", "sweep-out")),
            truth_path=resolve(doc.get("truth")),
            model_paths=[resolve(p) for p in doc.get("models", [])],
            variables_path=resolve(doc.get("variables")),
            generator=doc.get("generator"),
            expert=expert,
            tie_break=doc.get("averaging", {}).get("tie_break", "lexicographic"),
            theta1_grid=[float(v) for v in grid.get("theta1", [0.0])],
            theta2_grid=[float(v) for v in grid.get("theta2", [0.7])],
            correctness_grid=[None if v is None else float(v) for v in correctness],
            seeds=[int(s) for s in grid.get("seeds", [0])],
        )
        config.validate()
        return config

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as handle:
            try:
                doc = json.load(handle)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: not valid JSON ({exc})") from exc
        try:
            return cls.from_json(doc, base_dir=path.parent)
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from exc

    def validate(self) -> None:
        if bool(self.model_paths) == bool(self.generator):
            raise ValueError("configure exactly one of 'models' and 'generator'")
        if self.generator and self.truth_path is None:
            raise ValueError("the generator needs a 'truth' graph to perturb")
        if self.expert.get("kind") == "simulated" and self.truth_path is None:
            raise ValueError("a simulated expert needs a 'truth' graph")
        for name, grid in (("theta1", self.theta1_grid), ("theta2", self.theta2_grid),
                           ("seeds", self.seeds)):
            if not grid:
                raise ValueError(f"grid '{name}' must be non-empty")


@dataclass(frozen=True)
class Cell:
    theta1: float
    theta2: float
    correctness: Optional[float]
    seed: int

    def key(self) -> tuple[str, str, str, str]:
        return (
            str(float(self.theta1)),
            str(float(self.theta2)),
            "" if self.correctness is None else str(float(self.correctness)),
            str(self.seed),
        )


class _SweepContext:
    """Shared, read-only data loaded once per sweep."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.truth: Optional[GroundTruth] = None
        if config.truth_path is not None:
            variables = None
            if config.variables_path is not None:
                variables = load_variables(config.variables_path)
            self.truth = GroundTruth(parse_graph_file(config.truth_path, variables))
        self.fixed_models: Optional[list[MixedGraph]] = None
        if config.model_paths:
            variables = self.truth.variables if self.truth is not None else None
            if config.variables_path is not None:
                variables = load_variables(config.variables_path)
            self.fixed_models = [parse_graph_file(p, variables) for p in config.model_paths]
        self.cache = None
        if config.expert.get("kind") == "llm":
            cache_path = config.expert.get("cache")
            self.cache = AnswerCache(cache_path)

    def models_for(self, cell: Cell) -> list[MixedGraph]:
        if self.fixed_models is not None:
            return self.fixed_models
        gen = dict(self.config.generator or {})
        spec = PerturbationSpec(
            delete_rate=gen.get("delete_rate", 0.0),
            reverse_rate=gen.get("reverse_rate", 0.0),
            insert_rate=gen.get("insert_rate", 0.0),
            model_count=gen.get("model_count", 1),
            seed=cell.seed,
        )
        return perturb(self.truth.graph, spec)

    def expert_for(self, cell: Cell, models: list[MixedGraph]):
        spec = self.config.expert
        kind = spec.get("kind", "simulated")
        if kind == "simulated":
            correctness = cell.correctness if cell.correctness is not None else 1.0
            return SimulatedExpert(self.truth, correctness, seed=cell.seed)
        if kind == "scripted":
            with open(spec["transcript"], encoding="utf-8") as handle:
                return KeyedTranscriptExpert(json.load(handle))
        if kind == "llm":
            from .llm import LlmEndpointConfig, LlmExpert, PromptContext

            endpoint = LlmEndpointConfig.from_file(spec["config"])
            context = PromptContext.from_file(spec["context"])
            inner = LlmExpert(endpoint, context, audit_path=spec.get("audit"))
            wrapped = ConsistencyWrapper(inner, connection_counts(models))
            return CachedExpert(wrapped, self.cache, endpoint.expert_id)
        raise ValueError(f"unknown expert kind {kind!r} for sweeps")


def _run_cell(ctx: _SweepContext, cell: Cell) -> dict:
    row = {
        "network": ctx.config.network,
        "theta1": str(float(cell.theta1)),
        "theta2": str(float(cell.theta2)),
        "correctness": "" if cell.correctness is None else str(float(cell.correctness)),
        "seed": str(cell.seed),
        "error": "",
    }
    started = time.monotonic()
    try:
        models = ctx.models_for(cell)
        row["n_models"] = str(len(models))
        expert = ctx.expert_for(cell, models)
        config = AveragingConfig(cell.theta1, cell.theta2,
                                 tie_break=ctx.config.tie_break, seed=cell.seed)
        dag, trace = expert_model_average(models, config, expert)
        calls = count_expert_calls(trace)
        row["existence_calls"] = str(calls["existence_calls"])
        row["orientation_calls"] = str(calls["orientation_calls"])
        if ctx.truth is not None:
            report = score_graphs(ctx.truth.graph, dag.to_mixed_graph())
            row["bsf"] = str(float(report.bsf))
            row["shd"] = str(float(report.shd))
            row["f1"] = str(float(report.f1))
            row["precision"] = "" if report.precision is None else str(float(report.precision))
            row["precision_valid"] = str(report.precision_valid)
            row["recall"] = str(float(report.recall))
    except Exception as exc:  # cell failures are recorded, not fatal
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wallclock_ms"] = str(int((time.monotonic() - started) * 1000))
    return {column: row.get(column, "") for column in RESULT_COLUMNS}


def _cells(config: RunConfig) -> list[Cell]:
    return [
        Cell(t1, t2, p, seed)
        for t1 in config.theta1_grid
        for t2 in config.theta2_grid
        for p in config.correctness_grid
        for seed in config.seeds
    ]


def run_sweep(config: RunConfig, jobs: int = 1) -> list[dict]:
    """Run all grid cells, appending to results.csv; returns every row
    (existing plus new). Also rewrites summary.json."""
    config.output_dir.mkdir(parents=True, exist_ok=True)
    results_path = config.output_dir / "results.csv"

    existing: dict[tuple, dict] = {}
    if results_path.exists():
        with open(results_path, newline="", encoding="utf-8") as handle:
            for row in csv.DictReader(handle):
                key = (row["theta1"], row["theta2"], row["correctness"], row["seed"])
                existing[key] = row

    ctx = _SweepContext(config)
    pending = [cell for cell in _cells(config) if cell.key() not in existing]

    write_header = not results_path.exists()
    with open(results_path, "a", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=RESULT_COLUMNS)
        if write_header:
            writer.writeheader()
        if jobs <= 1:
            for cell in pending:
                row = _run_cell(ctx, cell)
                existing[cell.key()] = row
                writer.writerow(row)
                handle.flush()
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                futures = [(cell, pool.submit(_run_cell, ctx, cell)) for cell in pending]
                for cell, future in futures:
                    row = future.result()
                    existing[cell.key()] = row
                    writer.writerow(row)
                    handle.flush()

    rows = list(existing.values())
    summary = summarize(rows)
    summary_path = config.output_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return rows


def summarize(rows: list[dict]) -> dict:
    """Aggregate rows per grid point and pick the best cell by mean BSF,
    breaking ties by mean F1."""
    by_point: dict[tuple, list[dict]] = {}
    for row in rows:
        if row.get("error"):
            continue
        by_point.setdefault((row["theta1"], row["theta2"], row["correctness"]), []).append(row)

    def stats(values: list[float]) -> dict:
        return {"mean": mean(values), "std": stdev(values) if len(values) > 1 else 0.0}

    points = []
    for (theta1, theta2, correctness), group in sorted(by_point.items()):
        entry: dict = {
            "theta1": float(theta1),
            "theta2": float(theta2),
            "correctness": float(correctness) if correctness else None,
            "cells": len(group),
        }
        for metric in ("bsf", "shd", "f1", "recall"):
            values = [float(r[metric]) for r in group if r.get(metric)]
            if values:
                entry[metric] = stats(values)
        precise = [float(r["precision"]) for r in group if r.get("precision")]
        if precise:
            entry["precision"] = stats(precise)
        entry["invalid_precision_count"] = sum(
            1 for r in group if r.get("precision_valid") == "False")
        calls = [int(r["existence_calls"]) + int(r["orientation_calls"])
                 for r in group if r.get("existence_calls")]
        if calls:
            entry["expert_calls"] = stats([float(c) for c in calls])
        points.append(entry)

    best = None
    scored = [p for p in points if "bsf" in p and "f1" in p]
    if scored:
        top = max(scored, key=lambda p: (p["bsf"]["mean"], p["f1"]["mean"]))
        best = {
            "theta1": top["theta1"],
            "theta2": top["theta2"],
            "correctness": top["correctness"],
            "mean_bsf": top["bsf"]["mean"],
            "mean_f1": top["f1"]["mean"],
        }
    return {"grid_points": points, "best": best, "rows": len(rows)}
