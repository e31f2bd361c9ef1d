"""Alternating optimization of the transport-regularized multi-task loss.

The loss over signed coefficient parts theta = theta_pos - theta_neg is

    sum_t [ ||X^t theta^t - Y^t||^2 / (2n) + lambda (sum theta_pos^t
            + sum theta_neg^t) ]
    + (mu / T) sum_t [ G(P1^t, theta_pos^t, bar_pos)
                       + G(P2^t, theta_neg^t, bar_neg) ]

with G the unbalanced transport cost. One outer iteration updates every
theta_pos^t by proximal coordinate descent against the effective target
Y + X theta_neg^t, then every theta_neg^t against the negated design, then
refreshes the two barycenters and the plan marginals with warm-started
scaling iterations. The lambda weight applies per task, matching the
coordinate subproblem's soft-threshold level and the independent-lasso
limit at mu = 0.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ot
from .core import FitReport, GroundMetric, MtwHyperparams, MultiTaskProblem, \
    resolve_gamma, validate_problem
from .errors import ShapeMismatchError
from .proxcd import CdState, ProxParams, cd_update, column_lipschitz

__all__ = ["MtwModel", "SolverState", "fit", "evaluate_loss",
           "warm_start_transfer"]


@dataclass
class MtwModel:
    """A problem bound to its ground metric, kernel and hyperparameters."""

    problem: MultiTaskProblem
    metric: GroundMetric
    params: MtwHyperparams
    kernel: ot.Kernel
    designs: tuple        # per-task design, Fortran order
    designs_neg: tuple    # negated copies for the negative-part pass
    lipschitz: tuple      # per-task squared column norms

    @classmethod
    def build(cls, problem: MultiTaskProblem, metric: GroundMetric,
              params: MtwHyperparams) -> "MtwModel":
        validate_problem(problem)
        params.validate()
        if metric.p != problem.p:
            raise ShapeMismatchError(
                f"metric dimension {metric.p} != problem p {problem.p}")
        kernel = ot.build_kernel(metric, params.epsilon)
        designs = tuple(np.asfortranarray(X) for X in problem.designs)
        designs_neg = tuple(np.asfortranarray(-X) for X in designs)
        lipschitz = tuple(column_lipschitz(X) for X in designs)
        return cls(problem=problem, metric=metric, params=params,
                   kernel=kernel, designs=designs, designs_neg=designs_neg,
                   lipschitz=lipschitz)


@dataclass
class SolverState:
    """Coefficients, barycenters, scalings and residuals of one fit."""

    theta_pos: np.ndarray           # (p, T), Fortran order
    theta_neg: np.ndarray           # (p, T)
    marginals_pos: np.ndarray       # (T, p)
    marginals_neg: np.ndarray       # (T, p)
    bary_pos: np.ndarray            # (p,)
    bary_neg: np.ndarray            # (p,)
    residuals: np.ndarray           # (T, n), rows X theta - Y
    scalings_pos: Optional[ot.ScalingState] = None
    scalings_neg: Optional[ot.ScalingState] = None
    gamma: Optional[float] = None   # frozen auto-resolved value, set by fit

    def coefficients(self) -> np.ndarray:
        return self.theta_pos - self.theta_neg


def warm_start_transfer(previous: Optional[SolverState],
                        model: MtwModel) -> SolverState:
    """Initial state for a fit, reusing a previous state when given.

    A fresh state uses uniform coefficients 1/p, uniform marginals,
    all-ones scalings and an all-ones barycenter; under the positivity
    constraint the negative part starts (and stays) at zero.
    """
    p, T, n = model.problem.p, model.problem.n_tasks, model.problem.n
    if previous is not None:
        if previous.theta_pos.shape != (p, T):
            raise ShapeMismatchError(
                f"previous state has shape {previous.theta_pos.shape}, "
                f"expected ({p}, {T})")
        return SolverState(
            theta_pos=np.asfortranarray(previous.theta_pos.copy()),
            theta_neg=np.asfortranarray(previous.theta_neg.copy()),
            marginals_pos=previous.marginals_pos.copy(),
            marginals_neg=previous.marginals_neg.copy(),
            bary_pos=previous.bary_pos.copy(),
            bary_neg=previous.bary_neg.copy(),
            residuals=previous.residuals.copy(),
            scalings_pos=previous.scalings_pos,
            scalings_neg=previous.scalings_neg,
            gamma=previous.gamma)

    theta_pos = np.asfortranarray(np.full((p, T), 1.0 / p))
    theta_neg = np.asfortranarray(np.full((p, T), 1.0 / p))
    bary_pos = np.ones(p)
    bary_neg = np.ones(p)
    if model.params.positive:
        theta_neg = np.asfortranarray(np.zeros((p, T)))
        bary_neg = np.zeros(p)
    residuals = np.empty((T, n))
    theta = theta_pos - theta_neg
    for t in range(T):
        residuals[t] = model.designs[t] @ theta[:, t] - model.problem.targets[t]
    return SolverState(
        theta_pos=theta_pos, theta_neg=theta_neg,
        marginals_pos=np.full((T, p), 1.0 / p),
        marginals_neg=np.full((T, p), 1.0 / p),
        bary_pos=bary_pos, bary_neg=bary_neg, residuals=residuals,
        scalings_pos=ot.ScalingState.ones(p, T),
        scalings_neg=ot.ScalingState.ones(p, T))


def _update_barycenter(thetas, kernel, gamma, params, warm, stable):
    """One barycenter refresh with sticky log-domain escalation.

    Returns (marginals, barycenter, objective, scalings, stable).
    Zero total mass short-circuits to an empty transport (cost 0).
    """
    p, T = thetas.shape
    if thetas.sum() == 0.0:
        return (np.zeros((T, p)), np.zeros(p), 0.0, None, stable)
    if not stable:
        res = ot.barycenter(thetas, kernel, gamma, tol=params.tol_sinkhorn,
                            max_iter=params.max_sinkhorn, warm=warm)
        if res.overflowed:
            stable = True
            warm = res.scalings.to_log() if res.scalings is not None else None
        else:
            return (res.left_marginals, res.barycenter, res.objective,
                    res.scalings, stable)
    res = ot.barycenter_log(thetas, kernel, gamma, tol=params.tol_sinkhorn,
                            max_iter=params.max_sinkhorn,
                            warm=warm.to_log() if warm is not None else None)
    return (res.left_marginals, res.barycenter, res.objective, res.scalings,
            True)


def fit(model: MtwModel, init: Optional[SolverState] = None,
        seed: int = 0) -> FitReport:
    """Minimize the multi-task loss by alternating optimization.

    The solver is deterministic; ``seed`` is accepted for interface
    uniformity with the stochastic routines and has no effect.

    Stops when the largest coefficient change relative to
    ``max(1, |theta|_max)`` falls below ``tol_outer``, or flags
    ``converged=False`` after ``max_outer`` iterations.
    """
    del seed
    params = model.params
    p, T, n = model.problem.p, model.problem.n_tasks, model.problem.n
    state = warm_start_transfer(init, model)
    if state.gamma is None:
        state.gamma = resolve_gamma(params, state.theta_pos.sum(axis=0))
    gamma = state.gamma
    mu, lam = params.mu, params.lam
    positive = params.positive

    theta_old = state.coefficients()
    trace, dtrace = [], []
    seconds_cd = 0.0
    seconds_ot = 0.0
    stable_pos = state.scalings_pos.log_domain if state.scalings_pos else False
    stable_neg = state.scalings_neg.log_domain if state.scalings_neg else False
    converged = False
    iterations = 0

    for _ in range(params.max_outer):
        iterations += 1
        tic = time.perf_counter()
        for t in range(T):
            prox = ProxParams.from_hyperparams(mu, lam, gamma, T,
                                               state.marginals_pos[t])
            cd_state = CdState(theta=state.theta_pos[:, t],
                               residual=state.residuals[t],
                               lipschitz=model.lipschitz[t])
            cd_update(model.designs[t], None, cd_state, prox,
                      max_iter=params.max_cd, tol=params.tol_cd)
        if not positive:
            for t in range(T):
                prox = ProxParams.from_hyperparams(mu, lam, gamma, T,
                                                   state.marginals_neg[t])
                cd_state = CdState(theta=state.theta_neg[:, t],
                                   residual=state.residuals[t],
                                   lipschitz=model.lipschitz[t])
                cd_update(model.designs_neg[t], None, cd_state, prox,
                          max_iter=params.max_cd, tol=params.tol_cd)
        seconds_cd += time.perf_counter() - tic

        theta = state.coefficients()
        dx = np.abs(theta - theta_old).max() / max(1.0, theta_old.max(),
                                                   theta.max())
        theta_old = theta

        objective = 0.5 * float(np.sum(state.residuals ** 2)) / n
        objective += lam * float(state.theta_pos.sum()
                                 + state.theta_neg.sum())

        tic = time.perf_counter()
        if mu > 0:
            (state.marginals_pos, state.bary_pos, fot_pos,
             state.scalings_pos, stable_pos) = _update_barycenter(
                state.theta_pos, model.kernel, gamma, params,
                state.scalings_pos, stable_pos)
            objective += mu * fot_pos / T
            if not positive:
                (state.marginals_neg, state.bary_neg, fot_neg,
                 state.scalings_neg, stable_neg) = _update_barycenter(
                    state.theta_neg, model.kernel, gamma, params,
                    state.scalings_neg, stable_neg)
                objective += mu * fot_neg / T
        seconds_ot += time.perf_counter() - tic

        trace.append(objective)
        dtrace.append(dx)
        if dx < params.tol_outer:
            converged = True
            break

    return FitReport(
        coefficients=state.coefficients(),
        barycenter_pos=state.bary_pos,
        barycenter_neg=state.bary_neg,
        objective_trace=trace,
        delta_trace=dtrace,
        converged=converged,
        iterations_used=iterations,
        seconds_cd=seconds_cd,
        seconds_ot=seconds_ot,
        state=state)


def evaluate_loss(state: SolverState, model: MtwModel,
                  gamma: Optional[float] = None) -> float:
    """Loss value at an arbitrary state, transport terms from scalings.

    The transport costs are the primal values of the plans induced by the
    state's scaling vectors, computed from dual quantities without
    materializing any plan. With ``gamma=None`` the state's frozen value
    is used when present, else the hyperparameter is resolved against the
    state's positive masses.
    """
    params = model.params
    if gamma is None:
        gamma = state.gamma if state.gamma is not None else \
            resolve_gamma(params, state.theta_pos.sum(axis=0))
    T = model.problem.n_tasks
    n = model.problem.n
    theta = state.coefficients()
    value = 0.0
    for t in range(T):
        r = model.problem.designs[t] @ theta[:, t] - model.problem.targets[t]
        value += 0.5 * float(r @ r) / n
    value += params.lam * float(state.theta_pos.sum() + state.theta_neg.sum())
    if params.mu > 0:
        for t in range(T):
            if state.scalings_pos is not None:
                value += params.mu / T * ot.transport_objective_from_scalings(
                    state.scalings_pos, t, state.theta_pos[:, t],
                    state.bary_pos, model.kernel, gamma)
            if state.scalings_neg is not None and not params.positive:
                value += params.mu / T * ot.transport_objective_from_scalings(
                    state.scalings_neg, t, state.theta_neg[:, t],
                    state.bary_neg, model.kernel, gamma)
    return value
