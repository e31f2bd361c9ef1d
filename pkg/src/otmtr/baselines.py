"""Reference estimators: independent Lasso and the common/specific
("dirty") decomposition with l21 + l1 penalties.

Both minimize a 1/(2n)-normalized quadratic, so their regularization
scales are directly comparable with the transport-regularized model. The
dirty objective is

    sum_t ||X^t (theta_c^t + theta_s^t) - Y^t||^2 / (2n)
    + mu ||Theta_c||_{2,1} + lambda ||Theta_s||_1

solved by alternating block proximal gradient with exact per-block prox.
The subgradient conditions at a solution force two degenerate regimes:
lambda > mu kills the specific part (pure group-lasso), while
mu > sqrt(T) * lambda kills the common part, reducing the model to
independent per-task Lassos. The informative search region is therefore
the triangle lambda <= mu <= sqrt(T) * lambda under (mu_max, lambda_max).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .core import MultiTaskProblem
from .errors import ConvergenceWarning
from .proxcd import column_lipschitz

__all__ = ["fit_lasso", "DirtyParams", "dirty_bounds", "fit_dirty",
           "dirty_grid"]


@njit(cache=True)
def _lasso_sweeps(X, R, w, lam_n, lip, max_sweeps, tol, positive):
    n, p = X.shape
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(p):
            old = w[j]
            grad = 0.0
            for i in range(n):
                grad += X[i, j] * R[i]
            z = old - grad / lip[j]
            thr = lam_n / lip[j]
            if positive:
                new = z - thr if z > thr else 0.0
            else:
                if z > thr:
                    new = z - thr
                elif z < -thr:
                    new = z + thr
                else:
                    new = 0.0
            step = new - old
            if step != 0.0:
                for i in range(n):
                    R[i] += X[i, j] * step
                w[j] = new
            if abs(step) > max_delta:
                max_delta = abs(step)
        max_w = 1.0
        for j in range(p):
            if abs(w[j]) > max_w:
                max_w = abs(w[j])
        if max_delta / max_w < tol:
            return sweep + 1, True
    return max_sweeps, False


def fit_lasso(design, target, lam, max_iter: int = 50000, tol: float = 1e-8,
              positive: bool = False,
              init: Optional[np.ndarray] = None) -> np.ndarray:
    """Coordinate-descent Lasso for one task.

    Minimizes ``||X w - y||^2 / (2n) + lam * ||w||_1`` (nonnegative
    coefficients when ``positive``). The critical value above which the
    solution is identically zero is ``||X^T y||_inf / n``.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    X = np.asfortranarray(design, dtype=float)
    y = np.asarray(target, dtype=float)
    n, p = X.shape
    w = np.zeros(p) if init is None else init.astype(float).copy()
    lip = column_lipschitz(X)
    R = X @ w - y
    _, converged = _lasso_sweeps(X, R, w, n * lam, lip, max_iter, tol,
                                 positive)
    if not converged:
        warnings.warn("lasso stopped on its iteration budget",
                      ConvergenceWarning)
    return w


@dataclass(frozen=True)
class DirtyParams:
    """Weights of the dirty model: mu on the shared l21 block, lambda on
    the task-specific l1 block. ``bounds`` optionally records the
    (mu_max, lambda_max) critical values of the problem it was built for."""

    mu: float
    lam: float
    bounds: Optional[tuple] = None

    def __post_init__(self):
        if self.mu <= 0 or self.lam <= 0:
            raise ValueError("mu and lambda must be > 0")


def dirty_bounds(problem: MultiTaskProblem) -> tuple:
    """Critical values (mu_max, lambda_max) above which each block is zero.

    From the zero-solution subgradient conditions of the 1/(2n)-normalized
    objective: ``lambda_max = max_jt |X^t.T Y^t|_jt / n`` and
    ``mu_max = max_j ||row_j(X.T Y / n)||_2``.
    """
    grads = np.stack([X.T @ y / problem.n
                      for X, y in zip(problem.designs, problem.targets)],
                     axis=1)
    lam_max = float(np.abs(grads).max())
    mu_max = float(np.linalg.norm(grads, axis=1).max())
    return mu_max, lam_max


def _group_soft_threshold(Z, thr):
    norms = np.linalg.norm(Z, axis=1)
    scale = np.zeros_like(norms)
    np.divide(norms - thr, norms, out=scale, where=norms > thr)
    return Z * scale[:, None]


def fit_dirty(problem: MultiTaskProblem, params: DirtyParams,
              max_iter: int = 20000, tol: float = 1e-8,
              init: Optional[tuple] = None) -> tuple:
    """Alternating block proximal gradient for the dirty model.

    Returns ``(theta_common, theta_specific)``, both (p, T); the fitted
    coefficients are their sum. The common block uses a row-wise group
    soft threshold with a step valid across all tasks; the specific block
    soft-thresholds entrywise with per-task steps.
    """
    p, T, n = problem.p, problem.n_tasks, problem.n
    designs = [np.asarray(X, dtype=float) for X in problem.designs]
    targets = [np.asarray(y, dtype=float) for y in problem.targets]
    lips = np.array([np.linalg.norm(X, 2) ** 2 / n for X in designs])
    step_c = 1.0 / lips.max()
    steps_s = 1.0 / lips

    if init is not None:
        theta_c = init[0].astype(float).copy()
        theta_s = init[1].astype(float).copy()
    else:
        theta_c = np.zeros((p, T))
        theta_s = np.zeros((p, T))

    def grad(tc, ts):
        g = np.empty((p, T))
        for t in range(T):
            r = designs[t] @ (tc[:, t] + ts[:, t]) - targets[t]
            g[:, t] = designs[t].T @ r / n
        return g

    converged = False
    for _ in range(max_iter):
        g = grad(theta_c, theta_s)
        new_c = _group_soft_threshold(theta_c - step_c * g,
                                      step_c * params.mu)
        g = grad(new_c, theta_s)
        z = theta_s - steps_s[None, :] * g
        thr = params.lam * steps_s[None, :]
        new_s = np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)
        delta = max(np.abs(new_c - theta_c).max(),
                    np.abs(new_s - theta_s).max())
        scale = max(1.0, np.abs(new_c).max(), np.abs(new_s).max())
        theta_c, theta_s = new_c, new_s
        if delta / scale < tol:
            converged = True
            break
    if not converged:
        warnings.warn("dirty solver stopped on its iteration budget",
                      ConvergenceWarning)
    return theta_c, theta_s


def dirty_objective(problem: MultiTaskProblem, params: DirtyParams,
                    theta_c, theta_s) -> float:
    value = 0.0
    for t in range(problem.n_tasks):
        r = problem.designs[t] @ (theta_c[:, t] + theta_s[:, t]) \
            - problem.targets[t]
        value += 0.5 * float(r @ r) / problem.n
    value += params.mu * float(np.linalg.norm(theta_c, axis=1).sum())
    value += params.lam * float(np.abs(theta_s).sum())
    return value


def dirty_grid(problem: MultiTaskProblem, n_base: int = 15,
               n_depth: int = 20) -> list:
    """Hyperparameter pairs covering the informative dirty-model region.

    Emits ``n_base * n_depth`` triangle points: ``n_base`` slope ratios
    lambda/mu log-spaced in [1/sqrt(T), 1] crossed with ``n_depth`` shrink
    factors log-spaced in [1, 1/100] off (mu_max, .), plus ``n_base``
    points on the mu = mu_max edge with lambda log-spaced between
    lambda_max and lambda_max / 100. Total: ``n_base * (n_depth + 1)``.
    """
    if n_base < 1 or n_depth < 1:
        raise ValueError("grid counts must be >= 1")
    mu_max, lam_max = dirty_bounds(problem)
    ratios = np.geomspace(1.0 / np.sqrt(problem.n_tasks), 1.0, n_base)
    depths = np.geomspace(1.0, 0.01, n_depth)
    pairs = [(float(f * mu_max), float(f * mu_max * r))
             for f in depths for r in ratios]
    pairs += [(mu_max, float(l))
              for l in np.geomspace(lam_max, lam_max / 100.0, n_base)]
    return pairs
