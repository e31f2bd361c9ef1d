"""Hyperparameter grids and sweep runners for the four estimators.

Model selection follows the benchmark protocol: the Lasso sweeps a
20-value log grid from its critical value lambda_max down to
lambda_max / 100; the transport model crosses 10 log-spaced coupling
weights mu in [1, 100] with the same lambda grid; the dirty model walks
its triangle grid; the group lasso is the dirty model restricted to its
specific-part-free regime (lambda pinned above mu) on a log grid of mu.
Each candidate is scored by mean precision-recall AUC against the true
supports, or by cross-validated prediction MSE when no truth is given.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import baselines, solver
from .core import GroundMetric, MtwHyperparams, MultiTaskProblem
from .metrics import evaluate_estimate

__all__ = ["SweepCell", "SweepResult", "lasso_lambda_grid", "mtw_mu_grid",
           "sweep_model", "MODEL_NAMES"]

MODEL_NAMES = ("lasso", "glasso", "dirty", "mtw")


@dataclass(frozen=True)
class SweepCell:
    model: str
    params: dict
    score: float            # mean PR-AUC (higher better) or -CV-MSE
    auc: Optional[float]
    mse: Optional[float]
    converged: bool


@dataclass(frozen=True)
class SweepResult:
    model: str
    best: SweepCell
    cells: tuple
    best_coefficients: np.ndarray


def lasso_lambda_grid(problem: MultiTaskProblem, n_values: int = 20,
                      span: float = 100.0) -> np.ndarray:
    """Log grid from the zero-solution critical value down by ``span``."""
    if n_values < 1:
        raise ValueError("grid needs at least one value")
    lam_max = max(
        float(np.abs(X.T @ y).max()) / problem.n
        for X, y in zip(problem.designs, problem.targets))
    return np.geomspace(lam_max, lam_max / span, n_values)


def mtw_mu_grid(n_values: int = 10, lo: float = 1.0,
                hi: float = 100.0) -> np.ndarray:
    if n_values < 1:
        raise ValueError("grid needs at least one value")
    return np.geomspace(lo, hi, n_values)


def _score(coefficients, truth, problem, cv_evaluator):
    if truth is not None:
        result = evaluate_estimate(coefficients, truth)
        return result.auc_pr_mean, float(result.auc_pr_mean), \
            float(result.mse.mean())
    mse = cv_evaluator(coefficients)
    return -mse, None, mse


def _cv_splits(n, folds, seed):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    return [perm[f::folds] for f in range(folds)]


def _cv_mse_lasso(problem, lam, positive, folds, seed):
    total = 0.0
    count = 0
    for X, y in zip(problem.designs, problem.targets):
        for test in _cv_splits(problem.n, folds, seed):
            train = np.setdiff1d(np.arange(problem.n), test)
            w = baselines.fit_lasso(X[train], y[train], lam,
                                    positive=positive)
            r = X[test] @ w - y[test]
            total += float(r @ r)
            count += test.size
    return total / count


def sweep_lasso(problem, truth, n_values=20, positive=False, folds=5,
                seed=0):
    grid = lasso_lambda_grid(problem, n_values)
    cells = []
    best = None
    best_theta = None
    inits = [None] * problem.n_tasks
    for lam in grid:
        theta = np.column_stack([
            baselines.fit_lasso(X, y, float(lam), positive=positive,
                                init=inits[t])
            for t, (X, y) in enumerate(zip(problem.designs,
                                           problem.targets))])
        inits = [theta[:, t] for t in range(problem.n_tasks)]
        if truth is not None:
            score, auc, mse = _score(theta, truth, problem, None)
        else:
            mse = _cv_mse_lasso(problem, float(lam), positive, folds, seed)
            score, auc = -mse, None
        cell = SweepCell("lasso", {"lambda": float(lam)}, score, auc, mse,
                         True)
        cells.append(cell)
        if best is None or cell.score > best.score:
            best, best_theta = cell, theta
    return SweepResult("lasso", best, tuple(cells), best_theta)


def _sweep_dirty_pairs(model_name, problem, truth, pairs, folds, seed):
    cells = []
    best = None
    best_theta = None
    init = None
    for mu, lam in pairs:
        params = baselines.DirtyParams(mu=mu, lam=lam)
        theta_c, theta_s = baselines.fit_dirty(problem, params, init=init)
        init = (theta_c, theta_s)
        theta = theta_c + theta_s
        if truth is not None:
            score, auc, mse = _score(theta, truth, problem, None)
        else:
            r2 = sum(float(np.sum((X @ theta[:, t] - y) ** 2))
                     for t, (X, y) in enumerate(zip(problem.designs,
                                                    problem.targets)))
            mse = r2 / (problem.n * problem.n_tasks)
            score, auc = -mse, None
        cell = SweepCell(model_name, {"mu": mu, "lambda": lam}, score, auc,
                         mse, True)
        cells.append(cell)
        if best is None or cell.score > best.score:
            best, best_theta = cell, theta
    return SweepResult(model_name, best, tuple(cells), best_theta)


def sweep_dirty(problem, truth, n_base=15, n_depth=20, folds=5, seed=0):
    pairs = baselines.dirty_grid(problem, n_base=n_base, n_depth=n_depth)
    return _sweep_dirty_pairs("dirty", problem, truth, pairs, folds, seed)


def sweep_glasso(problem, truth, n_values=20, folds=5, seed=0):
    # Pure group lasso: the specific part is dead whenever lambda > mu,
    # so pin lambda = 2 mu and sweep the group weight alone.
    mu_max, _ = baselines.dirty_bounds(problem)
    pairs = [(float(mu), 2.0 * float(mu))
             for mu in np.geomspace(mu_max, mu_max / 100.0, n_values)]
    return _sweep_dirty_pairs("glasso", problem, truth, pairs, folds, seed)


def sweep_mtw(problem, metric, truth, base_params: MtwHyperparams,
              n_mu=10, n_lambda=20, folds=5, seed=0):
    """Cross the mu grid with the lasso lambda grid, warm-starting each
    descending lambda path."""
    lam_grid = lasso_lambda_grid(problem, n_lambda)
    mu_grid = mtw_mu_grid(n_mu)
    cells = []
    best = None
    best_theta = None
    model0 = solver.MtwModel.build(problem, metric, base_params)
    for mu in mu_grid:
        state = None
        for lam in lam_grid:
            params = base_params.replace(mu=float(mu), lam=float(lam))
            model = replace(model0, params=params)
            report = solver.fit(model, init=state, seed=seed)
            state = report.state
            theta = report.coefficients
            if truth is not None:
                score, auc, mse = _score(theta, truth, problem, None)
            else:
                r2 = sum(float(np.sum((X @ theta[:, t] - y) ** 2))
                         for t, (X, y) in enumerate(zip(problem.designs,
                                                        problem.targets)))
                mse = r2 / (problem.n * problem.n_tasks)
                score, auc = -mse, None
            cell = SweepCell("mtw",
                             {"mu": float(mu), "lambda": float(lam)},
                             score, auc, mse, report.converged)
            cells.append(cell)
            if best is None or cell.score > best.score:
                best, best_theta = cell, theta
    return SweepResult("mtw", best, tuple(cells), best_theta)


def sweep_model(name, problem, truth=None, metric: GroundMetric = None,
                base_params: MtwHyperparams = None, grids: dict = None,
                folds: int = 5, seed: int = 0) -> SweepResult:
    """Run the grid sweep of one model and return its leaderboard."""
    grids = grids or {}
    if name == "lasso":
        return sweep_lasso(problem, truth,
                           n_values=grids.get("n_lambda", 20),
                           positive=grids.get("positive", False),
                           folds=folds, seed=seed)
    if name == "glasso":
        return sweep_glasso(problem, truth,
                            n_values=grids.get("n_lambda", 20),
                            folds=folds, seed=seed)
    if name == "dirty":
        return sweep_dirty(problem, truth,
                           n_base=grids.get("n_base", 15),
                           n_depth=grids.get("n_depth", 20),
                           folds=folds, seed=seed)
    if name == "mtw":
        if metric is None or base_params is None:
            raise ValueError("mtw sweep needs a metric and base params")
        return sweep_mtw(problem, metric, truth, base_params,
                         n_mu=grids.get("n_mu", 10),
                         n_lambda=grids.get("n_lambda", 20),
                         folds=folds, seed=seed)
    raise ValueError(f"unknown model {name!r}")
