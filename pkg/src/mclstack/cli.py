"""Command line entry point.

``mclstack run GRAPH -o CLUSTERS`` clusters a graph and writes one cluster per
line plus a ``CLUSTERS.labels`` map. ``--bench`` also writes a JSON bench
record (``CLUSTERS.bench.json`` unless ``--bench-out`` is given).

``mclstack bench-pipeline`` compares the serial and pipelined SUMMA timelines
for stage costs read from a JSON file or harvested from a clustering run.

Exit codes: 0 success, 3 unreadable or malformed input, 4 memory budget
infeasible, 5 no convergence within ``--max-iterations``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .estimate import EstimatorConfig, estimate_nnz, exact_symbolic_nnz
from .exceptions import BudgetInfeasibleError, GraphParseError
from .io import format_clusters, format_label_map, load_graph
from .kernels import SelectorThresholds
from .mcl import MclParams, mcl_cluster
from .pipeline import PipelineMode, StageCosts, simulate_pipeline
from .summa import CostModel, GridConfig, MergeScheme

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_BUDGET = 4
EXIT_NOT_CONVERGED = 5

BENCH_SCHEMA = "mclstack.bench"
BENCH_SCHEMA_VERSION = 1

log = logging.getLogger("mclstack")


def _add_cluster_options(p: argparse.ArgumentParser):
    p.add_argument("--format", choices=["auto", "mm", "tsv"], default="auto")
    p.add_argument("--inflation", type=float, default=2.0)
    p.add_argument("--select-k", type=int, default=1000)
    p.add_argument("--prune-threshold", type=float, default=1e-4)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--epsilon", type=float, default=1e-4, help="convergence threshold")
    p.add_argument("--no-loops", action="store_true", help="do not add self-loops")
    p.add_argument("--budget-bytes", type=float, default=None)
    p.add_argument("--safety", type=float, default=0.9)
    p.add_argument("--grid", type=int, default=1, metavar="Q")
    p.add_argument("--phases", type=int, default=None, help="force the number of phases")
    p.add_argument("--est-keys", type=int, default=10, metavar="R")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--cf-threshold", type=float, default=2.0)
    p.add_argument("--kernel", choices=["heap", "hash", "auto"], default="auto")
    p.add_argument("--cf-switch", type=float, default=3.0)
    p.add_argument("--flops-floor", type=int, default=4096)
    p.add_argument("--merge", choices=["multiway", "binary"], default="binary")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mclstack", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="cluster a graph")
    run.add_argument("input", help="graph file (Matrix Market or labeled TSV)")
    _add_cluster_options(run)
    run.add_argument("-o", "--output", required=True)
    run.add_argument("--bench", action="store_true", help="write a bench record")
    run.add_argument("--bench-out", default=None)
    run.add_argument("--pipeline", action="store_true",
                     help="include serial/pipelined timelines in the bench record")

    bp = sub.add_parser("bench-pipeline", help="compare serial and pipelined SUMMA timelines")
    src = bp.add_mutually_exclusive_group(required=True)
    src.add_argument("--costs", help="JSON file with bcast/xfer/mult/merge lists")
    src.add_argument("--from-run", metavar="GRAPH", help="harvest stage costs from one MCL iteration")
    bp.add_argument("-o", "--output", default=None, help="write JSON here instead of stdout")
    _add_cluster_options(bp)
    return parser


def _run_settings(args):
    params = MclParams(
        inflation=args.inflation,
        prune_threshold=args.prune_threshold,
        select_k=args.select_k,
        max_iterations=args.max_iterations,
        convergence_epsilon=args.epsilon,
        add_loops=not args.no_loops,
    )
    est = EstimatorConfig(r=args.est_keys, lam=args.lam, seed=args.seed,
                          cf_threshold=args.cf_threshold, safety=args.safety)
    kwargs = dict(
        phases=args.phases,
        kernel=args.kernel,
        merge=MergeScheme(args.merge),
        thresholds=SelectorThresholds(args.cf_switch, args.flops_floor),
        n_threads=args.threads,
    )
    budget = math.inf if args.budget_bytes is None else args.budget_bytes
    return params, GridConfig(args.grid), budget, est, kwargs


def _config_record(args) -> dict:
    skip = {"command", "output", "bench_out", "verbose", "threads", "input"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _pipeline_record(costs: StageCosts) -> dict:
    serial = simulate_pipeline(costs, PipelineMode.SERIAL)
    piped = simulate_pipeline(costs, PipelineMode.PIPELINED)
    return {
        "costs": costs.to_dict(),
        "serial": serial.to_dict(),
        "pipelined": piped.to_dict(),
        "speedup": serial.overall / piped.overall if piped.overall > 0 else 1.0,
    }


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def cmd_run(args) -> int:
    try:
        graph, labels = load_graph(args.input, args.format)
        params, grid, budget, est, kwargs = _run_settings(args)
    except (GraphParseError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    estimator_rows = []

    def on_iteration(matrix_in, stats, iter_est):
        if not args.bench:
            return
        approx = estimate_nnz(matrix_in, matrix_in, iter_est)
        exact = exact_symbolic_nnz(matrix_in, matrix_in)
        estimator_rows.append({
            "iteration": stats.iteration,
            "probabilistic_total": approx.total,
            "exact_total": exact.total,
            "relative_error": (approx.total - exact.total) / exact.total if exact.total else 0.0,
            "work": approx.work,
        })

    try:
        result = mcl_cluster(graph, params, grid, budget, est, callback=on_iteration, **kwargs)
    except BudgetInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET

    out = Path(args.output)
    out.write_text(format_clusters(result.assignment, labels), encoding="utf-8")
    Path(str(out) + ".labels").write_text(format_label_map(labels), encoding="utf-8")
    log.info("%d clusters after %d iterations", result.assignment.num_clusters, len(result.history))

    if args.bench:
        peak = sum(s.peak_merge_elements for s in result.history)
        total = sum(s.multiway_merge_elements for s in result.history)
        record = {
            "schema": BENCH_SCHEMA,
            "schema_version": BENCH_SCHEMA_VERSION,
            "config": _config_record(args),
            "n_vertices": graph.nrows,
            "nnz_input": graph.nnz,
            "num_clusters": result.assignment.num_clusters,
            "converged": result.converged,
            "iterations": [s.to_dict(detail=True) for s in result.history],
            "merge_memory": {
                "peak_binary_or_selected": peak,
                "multiway_elements": total,
                "ratio": peak / total if total else None,
            },
            "estimator": estimator_rows,
        }
        if args.pipeline and result.history:
            first = result.history[0].expand.phases[0]
            record["pipeline"] = _pipeline_record(first.stage_costs(CostModel()))
        bench_path = Path(args.bench_out) if args.bench_out else Path(str(out) + ".bench.json")
        bench_path.write_text(_dump(record), encoding="utf-8")

    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_bench_pipeline(args) -> int:
    try:
        if args.costs:
            with open(args.costs, encoding="utf-8") as fh:
                costs = StageCosts.from_dict(json.load(fh))
        else:
            graph, _ = load_graph(args.from_run, args.format)
            params, grid, budget, est, kwargs = _run_settings(args)
            params = MclParams(**{**params.__dict__, "max_iterations": 1})
            result = mcl_cluster(graph, params, grid, budget, est, **kwargs)
            costs = result.history[0].expand.phases[0].stage_costs(CostModel())
        if costs.nstages == 0:
            raise ValueError("the cost list is empty")
    except BudgetInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (GraphParseError, OSError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    text = _dump({"schema": BENCH_SCHEMA, "schema_version": BENCH_SCHEMA_VERSION,
                  "pipeline": _pipeline_record(costs)})
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args)
    return cmd_bench_pipeline(args)


if __name__ == "__main__":
    sys.exit(main())
