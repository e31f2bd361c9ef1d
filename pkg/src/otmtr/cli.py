"""Command-line interface: simulate benchmarks, fit models, sweep grids
and run the overlap benchmark.

Exit codes: 0 on success, 1 on configuration or I/O errors, 2 when a fit
finished without reaching its convergence tolerance. All outputs are
derived deterministically from the configuration and seeds, whatever the
thread count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import baselines, io, plots, solver, sweeps
from .core import GroundMetric, MtwHyperparams, MultiTaskProblem, \
    resolve_epsilon, standardize_problem
from .errors import OtmtrError
from .simulate import GridScenario, make_truth

DEFAULT_OVERLAPS = (0.0, 0.25, 0.5, 0.75, 1.0)


def _thread_count(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("OTMTR_THREADS")
    return max(1, int(env)) if env else 1


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _grid_metric(grid, normalize=True) -> GroundMetric:
    metric = GroundMetric.grid2d(*grid)
    # The epsilon heuristic 1/(s p) only yields a representable kernel on
    # a metric with O(1) costs; rescale so the median cost is 1.
    return metric.normalized() if normalize else metric


def _mtw_params(problem, metric, config) -> MtwHyperparams:
    params = MtwHyperparams.from_dict(config) if config else MtwHyperparams()
    if "epsilon" not in config:
        params = params.replace(epsilon=resolve_epsilon(metric, problem.p))
    return params


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.overlap is not None:
        config["overlap"] = args.overlap
    scenario = GridScenario.from_dict(config)
    truth = make_truth(scenario)
    io.save_scenario_problem(args.out, truth)
    print(f"wrote scenario (seed={scenario.seed}, "
          f"overlap={scenario.overlap}) to {args.out}")
    return 0


def _write_fit_outputs(out_dir, report_dict, theta, trace=None,
                       delta_trace=None, extra_arrays=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.save_matrix_csv(out_dir / "theta.csv", theta)
    for name, arr in (extra_arrays or {}).items():
        io.save_matrix_csv(out_dir / name, arr)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report_dict, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if trace is not None and len(trace) > 0:
        plots.plot_objective_trace(trace, delta_trace,
                                   out_dir / "objective_trace.png")


def cmd_fit(args) -> int:
    raw_problem = io.load_problem(args.problem)
    config = _load_config(args.config)
    # Fits run on column-standardized designs unless disabled; written
    # coefficients are mapped back to the original basis.
    if config.get("standardize", True):
        problem, scales = standardize_problem(raw_problem)
    else:
        problem, scales = raw_problem, np.ones((raw_problem.p,
                                                raw_problem.n_tasks))
    if args.model == "mtw":
        grid = config.pop("grid", None)
        if grid is not None:
            metric = _grid_metric(tuple(grid))
        else:
            side = int(round(np.sqrt(problem.p)))
            if side * side != problem.p:
                print("error: non-square feature count; pass a grid in the "
                      "config", file=sys.stderr)
                return 1
            metric = _grid_metric((side, side))
        params = _mtw_params(problem, metric, config)
        model = solver.MtwModel.build(problem, metric, params)
        report = solver.fit(model, seed=args.seed or 0)
        _write_fit_outputs(
            args.out,
            {"model": "mtw", "converged": report.converged,
             "iterations": report.iterations_used,
             "seconds_cd": report.seconds_cd,
             "seconds_ot": report.seconds_ot,
             "objective_trace": list(map(float, report.objective_trace)),
             "delta_trace": list(map(float, report.delta_trace)),
             "params": params.to_dict()},
            report.coefficients / scales, report.objective_trace,
            report.delta_trace,
            extra_arrays={"barycenter_pos.csv": report.barycenter_pos[:, None],
                          "barycenter_neg.csv": report.barycenter_neg[:, None]})
        return 0 if report.converged else 2
    if args.model == "lasso":
        lam = config.get("lambda")
        if lam is None:
            lam = float(sweeps.lasso_lambda_grid(problem, 2)[0])
        theta = np.column_stack([
            baselines.fit_lasso(X, y, float(lam),
                                positive=config.get("positive", False))
            for X, y in zip(problem.designs, problem.targets)])
        _write_fit_outputs(args.out,
                           {"model": "lasso", "converged": True,
                            "params": {"lambda": float(lam)}},
                           theta / scales)
        return 0
    if args.model == "dirty":
        mu_max, lam_max = baselines.dirty_bounds(problem)
        params = baselines.DirtyParams(
            mu=float(config.get("mu", 0.5 * mu_max)),
            lam=float(config.get("lambda", 0.5 * lam_max)))
        theta_c, theta_s = baselines.fit_dirty(problem, params)
        _write_fit_outputs(
            args.out,
            {"model": "dirty", "converged": True,
             "params": {"mu": params.mu, "lambda": params.lam}},
            (theta_c + theta_s) / scales,
            extra_arrays={"theta_common.csv": theta_c / scales,
                          "theta_specific.csv": theta_s / scales})
        return 0
    print(f"error: unknown model {args.model}", file=sys.stderr)
    return 1


def _sweep_one(name, problem, truth, metric, base_params, grids, seed):
    result = sweeps.sweep_model(name, problem, truth=truth, metric=metric,
                                base_params=base_params, grids=grids,
                                seed=seed)
    return result


def cmd_sweep(args) -> int:
    problem = io.load_problem(args.problem)
    config = _load_config(args.config)
    if config.get("standardize", True):
        problem, _ = standardize_problem(problem)
    grids = config.get("grids", {})
    truth = None
    truth_path = Path(args.problem) / "truth.csv"
    if truth_path.exists():
        truth, _ = io.load_truth(args.problem)
    models = [args.model] if args.model != "all" else list(sweeps.MODEL_NAMES)
    grid_shape = config.get("grid")
    metric = None
    base_params = None
    if "mtw" in models:
        if grid_shape is None:
            side = int(round(np.sqrt(problem.p)))
            if side * side != problem.p:
                print("error: non-square feature count; pass a grid in the "
                      "config", file=sys.stderr)
                return 1
            grid_shape = (side, side)
        metric = _grid_metric(tuple(grid_shape))
        base_params = _mtw_params(problem, metric,
                                  config.get("mtw", {"positive": True}))
    leaderboard = []
    for name in models:
        result = _sweep_one(name, problem, truth, metric, base_params,
                            grids, args.seed or 0)
        leaderboard.append({
            "model": name,
            "best_params": result.best.params,
            "best_score": result.best.score,
            "best_auc": result.best.auc,
            "best_mse": result.best.mse,
            "cells": [asdict(c) for c in result.cells],
        })
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "leaderboard.json", "w") as fh:
        json.dump(leaderboard, fh, indent=2, sort_keys=True)
        fh.write("\n")
    ranking = sorted(leaderboard, key=lambda e: -e["best_score"])
    for entry in ranking:
        print(f"{entry['model']:>8s}  score={entry['best_score']:.4f}  "
              f"params={entry['best_params']}")
    return 0


def _bench_cell(scenario_kwargs, models, mtw_grids, other_grids):
    scenario = GridScenario(**scenario_kwargs)
    truth = make_truth(scenario)
    problem = MultiTaskProblem.from_arrays(
        [truth.design] * scenario.n_tasks, list(truth.targets))
    problem, _ = standardize_problem(problem)
    metric = _grid_metric(scenario.grid)
    base_params = MtwHyperparams(
        positive=True,
        epsilon=resolve_epsilon(metric, problem.p))
    rows = []
    for name in models:
        grids = mtw_grids if name == "mtw" else other_grids
        result = sweeps.sweep_model(
            name, problem, truth=truth.coefficients, metric=metric,
            base_params=base_params, grids=grids, seed=scenario.seed)
        rows.append({
            "model": name,
            "overlap": scenario.overlap,
            "seed": scenario.seed,
            "auc": result.best.auc,
            "mse": result.best.mse,
        })
    return rows


def cmd_bench(args) -> int:
    overlaps = (tuple(float(x) for x in args.overlaps.split(","))
                if args.overlaps else DEFAULT_OVERLAPS)
    master_seed = args.seed if args.seed is not None else 0
    if args.smoke:
        n_seeds = args.seeds if args.seeds is not None else 5
        grid = (8, 8)
        pool = (2, 2)
        mtw_grids = {"n_mu": 5, "n_lambda": 10, "positive": True}
        other_grids = {"n_lambda": 10, "n_base": 6, "n_depth": 6}
    else:
        n_seeds = args.seeds if args.seeds is not None else 20
        grid = (24, 24)
        pool = (4, 4)
        mtw_grids = {"n_mu": 10, "n_lambda": 20, "positive": True}
        other_grids = {"n_lambda": 20, "n_base": 15, "n_depth": 20}
    models = (args.models.split(",") if args.models
              else list(sweeps.MODEL_NAMES))

    cells = [dict(grid=grid, pool=pool, overlap=ov,
                  seed=master_seed * 100003 + s)
             for ov in overlaps for s in range(n_seeds)]
    workers = _thread_count(args)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            results = list(pool_exec.map(
                lambda c: _bench_cell(c, models, mtw_grids, other_grids),
                cells))
    else:
        results = [_bench_cell(c, models, mtw_grids, other_grids)
                   for c in cells]
    rows = [row for cell_rows in results for row in cell_rows]
    rows.sort(key=lambda r: (r["model"], r["overlap"], r["seed"]))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "bench.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "overlap", "seed", "auc", "mse"])
        for r in rows:
            writer.writerow([r["model"], f"{r['overlap']:.17g}", r["seed"],
                             f"{r['auc']:.17g}", f"{r['mse']:.17g}"])
    plots.plot_bench_curves(rows, out_dir / "auc_overlap.png")

    for model in models:
        by_overlap = {}
        for r in rows:
            if r["model"] == model:
                by_overlap.setdefault(r["overlap"], []).append(r["auc"])
        means = "  ".join(f"{ov:.2f}:{np.mean(v):.3f}"
                          for ov, v in sorted(by_overlap.items()))
        print(f"{model:>8s}  mean AUC by overlap  {means}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otmtr",
        description="Sparse multi-task regression with an unbalanced "
                    "optimal-transport consensus penalty.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $OTMTR_THREADS or 1)")
        p.add_argument("--out", required=True, help="output directory")

    p_sim = sub.add_parser("simulate", help="write a synthetic scenario")
    common(p_sim)
    p_sim.add_argument("--overlap", type=float, default=None)
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="fit one model on a problem dir")
    common(p_fit)
    p_fit.add_argument("--model", choices=("mtw", "lasso", "dirty"),
                       default="mtw")
    p_fit.add_argument("--problem", required=True)
    p_fit.set_defaults(func=cmd_fit)

    p_sweep = sub.add_parser("sweep", help="hyperparameter sweep")
    common(p_sweep)
    p_sweep.add_argument("--model",
                         choices=("all",) + sweeps.MODEL_NAMES,
                         default="all")
    p_sweep.add_argument("--problem", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_bench = sub.add_parser("bench",
                             help="simulate + sweep across overlaps/seeds")
    common(p_bench)
    p_bench.add_argument("--seeds", type=int, default=None)
    p_bench.add_argument("--overlaps", default=None,
                         help="comma-separated overlap fractions")
    p_bench.add_argument("--models", default=None,
                         help="comma-separated model names")
    p_bench.add_argument("--smoke", action="store_true",
                         help="5 seeds on an 8x8 grid with reduced grids")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OtmtrError, OSError, ValueError, KeyError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
