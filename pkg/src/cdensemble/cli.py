"""Command-line entry point.

Exit codes: 0 on success, 1 on runtime errors (named on stderr), 2 on
usage errors. All randomness flows from --seed; outputs are byte-identical
across runs given the same flags (the sweep's wallclock column excepted).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from .averaging import (
    AveragingConfig,
    bayesys_model_average,
    connection_counts,
    expert_model_average,
)
from .experts import (
    AnswerCache,
    CachedExpert,
    ConsistencyWrapper,
    ScriptedExpert,
    SimulatedExpert,
    count_expert_calls,
)
from .graph_io import load_variables, parse_graph_file, write_graph_file
from .graphs import GroundTruth
from .metrics import score_graphs
from .sweep import RunConfig, run_sweep


def _range_check(parser: argparse.ArgumentParser, name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        parser.error(f"{name} must lie in [0, 1], got {value}")


def _load_models(args, parser):
    variables = load_variables(args.variables) if getattr(args, "variables", None) else None
    models = [parse_graph_file(path, variables) for path in args.models]
    return models


def _build_expert(args, parser, models):
    if args.expert == "simulated":
        if not args.truth:
            parser.error("--expert simulated requires --truth")
        truth = GroundTruth(parse_graph_file(
            args.truth, load_variables(args.variables) if args.variables else None))
        return SimulatedExpert(truth, args.correctness, seed=args.seed)
    if args.expert == "scripted":
        if not args.transcript:
            parser.error("--expert scripted requires --transcript")
        return ScriptedExpert.from_file(args.transcript)
    if args.expert == "llm":
        from .llm import LlmEndpointConfig, LlmExpert, PromptContext

        if not args.llm_config or not args.context:
            parser.error("--expert llm requires --llm-config and --context")
        endpoint = LlmEndpointConfig.from_file(args.llm_config)
        context = PromptContext.from_file(args.context)
        expert = ConsistencyWrapper(
            LlmExpert(endpoint, context, audit_path=args.audit),
            connection_counts(models))
        if args.no_cache:
            return expert
        return CachedExpert(expert, AnswerCache(args.cache), endpoint.expert_id)
    parser.error(f"unknown expert {args.expert!r}")


def cmd_ensemble(args, parser) -> int:
    _range_check(parser, "--theta1", args.theta1)
    _range_check(parser, "--theta2", args.theta2)
    _range_check(parser, "--correctness", args.correctness)
    models = _load_models(args, parser)
    expert = _build_expert(args, parser, models)
    config = AveragingConfig(args.theta1, args.theta2,
                             tie_break=args.tie_break, seed=args.seed)
    dag, trace = expert_model_average(models, config, expert)
    write_graph_file(dag.to_mixed_graph(), args.out)
    if args.trace:
        trace.save(args.trace)
    calls = count_expert_calls(trace)
    print(f"consensus: {dag.edge_count} edges -> {args.out} "
          f"(expert calls: {calls['total']})")
    return 0


def cmd_score(args, parser) -> int:
    variables = load_variables(args.variables) if args.variables else None
    truth = parse_graph_file(args.truth, variables)
    reports = []
    for path in args.predicted:
        predicted = parse_graph_file(path, variables or truth.variables)
        reports.append((path, score_graphs(truth, predicted)))

    def cell(value):
        return "invalid" if value is None else f"{float(value):.6g}"

    if args.format == "json":
        doc = [{"graph": str(path), **report.to_dict()} for path, report in reports]
        print(json.dumps(doc, indent=2))
        return 0
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["graph", "bsf", "shd", "f1", "precision", "recall"])
    for path, report in reports:
        writer.writerow([path, cell(report.bsf), cell(report.shd), cell(report.f1),
                         cell(report.precision), cell(report.recall)])
    if len(reports) > 1:
        from statistics import mean, stdev

        def agg(values):
            return f"{mean(values):.6g}±{(stdev(values) if len(values) > 1 else 0.0):.6g}"

        columns = []
        for metric in ("bsf", "shd", "f1"):
            columns.append(agg([float(getattr(r, metric)) for _, r in reports]))
        precise = [float(r.precision) for _, r in reports if r.precision is not None]
        columns.append(agg(precise) if precise else "invalid")
        columns.append(agg([float(r.recall) for _, r in reports]))
        writer.writerow(["mean±std", *columns])
    return 0


def cmd_sweep(args, parser) -> int:
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    config = RunConfig.from_file(args.config)
    rows = run_sweep(config, jobs=args.jobs)
    summary_path = config.output_dir / "summary.json"
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    best = summary.get("best")
    print(f"sweep complete: {len(rows)} cells -> {config.output_dir / 'results.csv'}")
    if best:
        correctness = best["correctness"]
        suffix = "" if correctness is None else f", correctness={correctness}"
        print(f"best cell by mean BSF then F1: theta1={best['theta1']}, "
              f"theta2={best['theta2']}{suffix} "
              f"(bsf={best['mean_bsf']:.4f}, f1={best['mean_f1']:.4f})")
    return 0


def cmd_serve(args, parser) -> int:
    from .service import serve

    serve(args.addr)
    return 0


def cmd_baseline(args, parser) -> int:
    if args.min_count < 1:
        parser.error("--min-count must be at least 1")
    models = _load_models(args, parser)
    dag = bayesys_model_average(models, args.min_count)
    write_graph_file(dag.to_mixed_graph(), args.out)
    print(f"baseline consensus: {dag.edge_count} edges -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cdensemble",
        description="Expert-guided model averaging for causal discovery ensembles.")
    sub = parser.add_subparsers(dest="command", required=True)

    ensemble = sub.add_parser("ensemble", help="average candidate models into a consensus DAG")
    ensemble.add_argument("--models", nargs="+", required=True,
                          help="candidate graph files (.csv needs --variables)")
    ensemble.add_argument("--variables", help="JSON variables file for CSV models")
    ensemble.add_argument("--theta1", type=float, default=0.0, help="edge threshold")
    ensemble.add_argument("--theta2", type=float, default=0.7, help="orientation threshold")
    ensemble.add_argument("--tie-break", choices=["lexicographic", "shuffle"],
                          default="lexicographic", help="equal-count pair ordering")
    ensemble.add_argument("--seed", type=int, default=0, help="run seed")
    ensemble.add_argument("--expert", choices=["simulated", "scripted", "llm"],
                          required=True, help="expert backing the run")
    ensemble.add_argument("--truth", help="ground-truth graph for the simulated expert")
    ensemble.add_argument("--correctness", type=float, default=0.8,
                          help="simulated expert correctness")
    ensemble.add_argument("--transcript", help="JSON transcript for the scripted expert")
    ensemble.add_argument("--llm-config", help="LLM endpoint config JSON")
    ensemble.add_argument("--context", help="prompt context JSON for the LLM expert")
    ensemble.add_argument("--cache", help="LLM answer-cache file (JSON lines)")
    ensemble.add_argument("--no-cache", action="store_true", help="bypass the answer cache")
    ensemble.add_argument("--audit", help="LLM audit log file (JSON lines)")
    ensemble.add_argument("--out", required=True, help="consensus graph output file")
    ensemble.add_argument("--trace", help="write the averaging trace here")
    ensemble.set_defaults(func=cmd_ensemble)

    score = sub.add_parser("score", help="score predicted graphs against a truth")
    score.add_argument("--truth", required=True, help="ground-truth graph file")
    score.add_argument("--predicted", nargs="+", required=True, help="graphs to score")
    score.add_argument("--variables", help="JSON variables file for CSV graphs")
    score.add_argument("--format", choices=["csv", "json"], default="csv")
    score.set_defaults(func=cmd_score)

    sweep = sub.add_parser("sweep", help="run a threshold/correctness/seed grid")
    sweep.add_argument("--config", required=True, help="sweep config JSON file")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    sweep.set_defaults(func=cmd_sweep)

    serve = sub.add_parser("serve", help="serve the human-expert session API")
    serve.add_argument("--addr", default="127.0.0.1:8000", help="bind address host:port")
    serve.set_defaults(func=cmd_serve)

    baseline = sub.add_parser("baseline-bayesys",
                              help="greedy count-ordered baseline consensus")
    baseline.add_argument("--models", nargs="+", required=True, help="candidate graph files")
    baseline.add_argument("--variables", help="JSON variables file for CSV models")
    baseline.add_argument("--min-count", type=int, default=1,
                          help="minimum directed count for a candidate edge")
    baseline.add_argument("--out", required=True, help="consensus graph output file")
    baseline.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
