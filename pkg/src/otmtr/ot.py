"""Entropy-regularized unbalanced optimal transport.

Distances and barycenters between nonnegative vectors where both marginal
constraints are relaxed to KL penalties of weight gamma. All solvers run
matrix-scaling iterations on a Gibbs kernel K = exp(-M / epsilon); transport
plans are never materialized, only their left marginals u * (K v).

A log-domain variant of every iteration is provided: scalings are kept as
logarithms and kernel applications become log-sum-exp contractions, which
keeps the updates finite for epsilon values far below what the linear
domain can represent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .core import GroundMetric
from .errors import ConvergenceWarning, DegenerateMassError

__all__ = [
    "Kernel",
    "ScalingState",
    "BarycenterResult",
    "build_kernel",
    "unbalanced_distance",
    "barycenter",
    "barycenter_log",
    "kl_div",
    "transport_objective",
    "transport_objective_from_scalings",
]

# Floor used when moving linear-domain scalings into log domain.
LOG_FLOOR = 1e-100


def kl_div(x, y) -> float:
    """KL(x | y) = <x, log(x/y)> + sum(y) - sum(x) for nonnegative vectors.

    Uses the continuous extensions 0 log(0/y) = 0 and 0 log(0/0) = 0;
    returns inf when some x_i > 0 while y_i = 0.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    pos = x > 0
    if np.any(pos & (y == 0)):
        return np.inf
    xp = x[pos]
    return float(np.sum(xp * np.log(xp / y[pos])) + y.sum() - x.sum())


def _entropy_term(P) -> float:
    # <P, log P - 1> with 0 log 0 = 0; this is minus the entropy E(P).
    P = np.asarray(P, dtype=float)
    pos = P > 0
    return float(np.sum(P[pos] * (np.log(P[pos]) - 1.0)))


def transport_objective(P, theta1, theta2, M, epsilon, gamma) -> float:
    """Primal transport cost of an explicit plan.

    <P, M> - epsilon * E(P) + gamma * KL(P 1 | theta1)
    + gamma * KL(P^T 1 | theta2), with E the entropy. Reference evaluator
    for tests and diagnostics; quadratic in p, so keep p small.
    """
    P = np.asarray(P, dtype=float)
    value = float(np.sum(P * M)) + epsilon * _entropy_term(P)
    value += gamma * kl_div(P.sum(axis=1), theta1)
    value += gamma * kl_div(P.sum(axis=0), theta2)
    return value


@dataclass
class Kernel:
    """Gibbs kernel exp(-M / epsilon) in dense or separable-grid form.

    The grid form stores two 1-D kernels along rows and columns whose
    outer application equals the dense kernel exactly when the cost is a
    (scaled) squared Euclidean distance on the grid. ``underflow`` flags
    linear-domain entries that rounded to zero; callers may then prefer
    the log-domain applications.
    """

    epsilon: float
    kind: str                       # "dense" | "grid2d"
    K: Optional[np.ndarray] = None
    log_K: Optional[np.ndarray] = field(default=None, repr=False)
    K_row: Optional[np.ndarray] = None
    K_col: Optional[np.ndarray] = None
    log_K_row: Optional[np.ndarray] = field(default=None, repr=False)
    log_K_col: Optional[np.ndarray] = field(default=None, repr=False)
    grid_shape: Optional[tuple] = None
    underflow: bool = False

    @property
    def p(self) -> int:
        if self.kind == "dense":
            return self.K.shape[0]
        h, w = self.grid_shape
        return h * w

    def _grid_apply(self, Kr, Kc, x):
        h, w = self.grid_shape
        single = x.ndim == 1
        img = x.reshape(h, w) if single else x.reshape(h, w, -1)
        out = np.einsum("ab,bw...->aw...", Kr, img)
        out = np.einsum("cd,ad...->ac...", Kc, out)
        return out.reshape(-1) if single else out.reshape(self.p, -1)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """K @ x for x of shape (p,) or (p, T)."""
        if self.kind == "dense":
            return self.K @ x
        return self._grid_apply(self.K_row, self.K_col, x)

    def apply_transpose(self, x: np.ndarray) -> np.ndarray:
        """K.T @ x."""
        if self.kind == "dense":
            return self.K.T @ x
        return self._grid_apply(self.K_row.T, self.K_col.T, x)

    def _dense_log_apply(self, logK, lx):
        single = lx.ndim == 1
        cols = lx[:, None] if single else lx
        out = np.empty_like(cols)
        for t in range(cols.shape[1]):
            out[:, t] = logsumexp(logK + cols[:, t][None, :], axis=1)
        return out[:, 0] if single else out

    def _grid_log_apply(self, lKr, lKc, lx):
        h, w = self.grid_shape
        single = lx.ndim == 1
        img = lx.reshape(h, w, 1) if single else lx.reshape(h, w, -1)
        # contract rows: A[a, j, t] = LSE_b(lKr[a, b] + img[b, j, t])
        A = logsumexp(lKr[:, :, None, None] + img[None, :, :, :], axis=1)
        # contract cols: B[a, c, t] = LSE_j(lKc[c, j] + A[a, j, t])
        B = logsumexp(lKc[None, :, :, None] + A[:, None, :, :], axis=2)
        return B.reshape(-1) if single else B.reshape(self.p, -1)

    def log_apply(self, lx: np.ndarray) -> np.ndarray:
        """log(K @ exp(lx)), computed by log-sum-exp."""
        if self.kind == "dense":
            return self._dense_log_apply(self.log_K, lx)
        return self._grid_log_apply(self.log_K_row, self.log_K_col, lx)

    def log_apply_transpose(self, lx: np.ndarray) -> np.ndarray:
        if self.kind == "dense":
            return self._dense_log_apply(self.log_K.T, lx)
        return self._grid_log_apply(self.log_K_row.T, self.log_K_col.T, lx)

    def as_dense(self) -> np.ndarray:
        """Materialize the full (p, p) kernel."""
        if self.kind == "dense":
            return self.K
        h, w = self.grid_shape
        return np.kron(self.K_row, self.K_col)


def build_kernel(metric: GroundMetric, epsilon: float) -> Kernel:
    """Build the Gibbs kernel exp(-M / epsilon) for a ground metric.

    Grid metrics yield the separable form: the squared distance splits
    into row and column terms, so K factorizes as a Kronecker product and
    is applied as two small matrix products.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if metric.kind == "dense":
        log_K = -metric.matrix / epsilon
        K = np.exp(log_K)
        return Kernel(epsilon=epsilon, kind="dense", K=K, log_K=log_K,
                      underflow=bool(K.min() == 0.0))
    h, w = metric.grid_shape
    dr = np.arange(h, dtype=float)
    dc = np.arange(w, dtype=float)
    log_K_row = -metric.scale * (dr[:, None] - dr[None, :]) ** 2 / epsilon
    log_K_col = -metric.scale * (dc[:, None] - dc[None, :]) ** 2 / epsilon
    K_row = np.exp(log_K_row)
    K_col = np.exp(log_K_col)
    underflow = bool(K_row.min() * K_col.min() == 0.0)
    return Kernel(epsilon=epsilon, kind="grid2d", K_row=K_row, K_col=K_col,
                  log_K_row=log_K_row, log_K_col=log_K_col,
                  grid_shape=(h, w), underflow=underflow)


@dataclass
class ScalingState:
    """Dual scaling vectors of one scaling run, kept for warm starts.

    ``u`` scales the input-measure side, ``v`` the barycenter side; both
    are (p, T). In log mode the scalings live in ``log_u``/``log_v``
    instead and the linear fields are None.
    """

    u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    log_domain: bool = False
    log_u: Optional[np.ndarray] = None
    log_v: Optional[np.ndarray] = None

    @classmethod
    def ones(cls, p: int, n_tasks: int) -> "ScalingState":
        return cls(u=np.ones((p, n_tasks)), v=np.ones((p, n_tasks)))

    def to_log(self) -> "ScalingState":
        """Absorb linear scalings into log domain (flooring exact zeros)."""
        if self.log_domain:
            return self
        return ScalingState(log_domain=True,
                            log_u=np.log(self.u + LOG_FLOOR),
                            log_v=np.log(self.v + LOG_FLOOR))


@dataclass
class BarycenterResult:
    barycenter: np.ndarray          # (p,)
    left_marginals: np.ndarray      # (T, p), rows u^t * (K v^t)
    objective: float
    constraint_trace: list
    overflowed: bool
    converged: bool
    scalings: Optional[ScalingState] = None


def _ratio(num, den):
    # 0/0 -> 0 (zero-mass convention); x/0 -> inf for x > 0, which is the
    # overflow signal that escalates a linear run to the log domain.
    out = np.zeros(np.broadcast_shapes(np.shape(num), np.shape(den)))
    np.divide(num, den, out=out, where=den > 0)
    out[np.broadcast_to(num > 0, out.shape) & (den == 0)] = np.inf
    return out


def _converged_objective(thetas, bar, marginals, epsilon, gamma) -> float:
    # At a scaling fixed point the per-task transport cost collapses to
    # gamma * (mass(theta) + mass(bar)) - (2 gamma + epsilon) * mass(plan).
    n_tasks = thetas.shape[1]
    return float(gamma * (thetas.sum() + n_tasks * bar.sum())
                 - (2.0 * gamma + epsilon) * marginals.sum())


def barycenter(thetas, kernel: Kernel, gamma: float, tol: float = 1e-4,
               max_iter: int = 1000,
               warm: Optional[ScalingState] = None) -> BarycenterResult:
    """Barycenter of T nonnegative vectors under unbalanced transport.

    Runs the three-step scaling iteration

        u^t   <- (theta^t / K v^t) ** (g/(g+e))
        bar   <- (mean_t (K^T u^t) ** (e/(e+g))) ** ((e+g)/e)
        v^t   <- (bar / K^T u^t) ** (g/(g+e))

    until the largest relative change of the barycenter drops below
    ``tol``. On numerical overflow the run aborts with ``overflowed=True``
    and the last finite scalings; callers retry via :func:`barycenter_log`.

    Parameters
    ----------
    thetas : ndarray (p, T)
        Input measures as columns; zero-mass columns get zero plans.
    kernel : Kernel
    gamma : float
        Marginal relaxation weight.
    warm : ScalingState, optional
        Barycenter-side scalings from a previous call.

    Returns
    -------
    BarycenterResult
        With left marginals m^t = u^t * (K v^t) and the summed transport
        objective evaluated in converged form from the marginals.
    """
    thetas = np.asarray(thetas, dtype=float)
    p, n_tasks = thetas.shape
    active = thetas.sum(axis=0) > 0
    if not active.any():
        raise DegenerateMassError("all input measures have zero mass")

    eps = kernel.epsilon
    frac = gamma / (gamma + eps)
    th = thetas[:, active]
    if warm is not None and warm.v is not None:
        v = warm.v[:, active].copy()
    else:
        v = np.ones_like(th)
    u = np.ones_like(th)
    Kv = kernel.apply(v)

    q = np.ones(p)
    q_old = q
    trace = []
    overflowed = False
    converged = False
    weight = 1.0 / n_tasks
    for _ in range(max_iter):
        u = _ratio(th, Kv) ** frac
        Ktu = kernel.apply_transpose(u)
        q = (weight * np.sum(Ktu ** (1.0 - frac), axis=1)) ** (1.0 / (1.0 - frac))
        cstr = np.abs(q - q_old).max() / max(q.max(), q_old.max(), 1.0)
        q_old = q
        v_prev = v
        v = _ratio(q[:, None], Ktu) ** frac
        if not (np.isfinite(v).all() and np.isfinite(q).all()):
            overflowed = True
            v = v_prev
            break
        Kv = kernel.apply(v)
        trace.append(cstr)
        if cstr < tol:
            converged = True
            break

    marginals_active = (u * Kv).T
    marginals = np.zeros((n_tasks, p))
    marginals[active] = marginals_active
    u_full = np.zeros((p, n_tasks))
    v_full = np.zeros((p, n_tasks))
    u_full[:, active] = u
    v_full[:, active] = v
    if overflowed:
        objective = float("nan")
    else:
        objective = _converged_objective(thetas, q, marginals, eps, gamma)
    return BarycenterResult(
        barycenter=q, left_marginals=marginals, objective=objective,
        constraint_trace=trace, overflowed=overflowed, converged=converged,
        scalings=ScalingState(u=u_full, v=v_full))


def barycenter_log(thetas, kernel: Kernel, gamma: float, tol: float = 1e-4,
                   max_iter: int = 1000,
                   warm: Optional[ScalingState] = None) -> BarycenterResult:
    """Log-domain variant of :func:`barycenter`.

    Mathematically identical iteration with scalings stored as logs and
    kernel products computed by log-sum-exp; stays finite for epsilon down
    to the resolver's default and inputs up to ~1e6.
    """
    thetas = np.asarray(thetas, dtype=float)
    p, n_tasks = thetas.shape
    active = thetas.sum(axis=0) > 0
    if not active.any():
        raise DegenerateMassError("all input measures have zero mass")

    eps = kernel.epsilon
    frac = gamma / (gamma + eps)
    lth = np.log(thetas[:, active] + LOG_FLOOR)
    if warm is not None:
        warm = warm.to_log()
        lv = warm.log_v[:, active].copy()
    else:
        lv = np.zeros_like(lth)
    lu = np.zeros_like(lth)
    lKv = kernel.log_apply(lv)

    q = np.ones(p)
    q_old = q
    log_T = np.log(n_tasks)
    trace = []
    converged = False
    for _ in range(max_iter):
        lu = frac * (lth - lKv)
        lKtu = kernel.log_apply_transpose(lu)
        lq = logsumexp((1.0 - frac) * lKtu - log_T, axis=1) / (1.0 - frac)
        q = np.exp(lq)
        cstr = np.abs(q - q_old).max() / max(q.max(), q_old.max(), 1.0)
        q_old = q
        lv = frac * (lq[:, None] - lKtu)
        lKv = kernel.log_apply(lv)
        trace.append(cstr)
        if cstr < tol:
            converged = True
            break

    marginals_active = np.exp(lu + lKv).T
    marginals = np.zeros((n_tasks, p))
    marginals[active] = marginals_active
    neg_inf = np.full((p, n_tasks), -np.inf)
    log_u = neg_inf.copy()
    log_v = neg_inf.copy()
    log_u[:, active] = lu
    log_v[:, active] = lv
    objective = _converged_objective(thetas, q, marginals, eps, gamma)
    return BarycenterResult(
        barycenter=q, left_marginals=marginals, objective=objective,
        constraint_trace=trace, overflowed=False, converged=converged,
        scalings=ScalingState(log_domain=True, log_u=log_u, log_v=log_v))


def transport_objective_from_scalings(scalings: ScalingState, task: int,
                                      theta1, theta2,
                                      kernel: Kernel, gamma: float) -> float:
    """Primal transport cost of the plan diag(u) K diag(v), no plan built.

    Exact for arbitrary scalings, not just converged ones: with marginals
    m1 = u * (K v) and m2 = v * (K^T u), the transport-entropy part equals
    epsilon * (<m1, log u> + <m2, log v> - mass(plan)).
    """
    eps = kernel.epsilon
    if scalings.log_domain:
        lu = scalings.log_u[:, task]
        lv = scalings.log_v[:, task]
        m1 = np.exp(lu + kernel.log_apply(lv))
        m2 = np.exp(lv + kernel.log_apply_transpose(lu))
    else:
        u = scalings.u[:, task]
        v = scalings.v[:, task]
        m1 = u * kernel.apply(v)
        m2 = v * kernel.apply_transpose(u)
        with np.errstate(divide="ignore"):
            lu = np.log(u)
            lv = np.log(v)
    dot_m1 = float(np.sum(m1[m1 > 0] * lu[m1 > 0]))
    dot_m2 = float(np.sum(m2[m2 > 0] * lv[m2 > 0]))
    value = eps * (dot_m1 + dot_m2 - m1.sum())
    value += gamma * (kl_div(m1, theta1) + kl_div(m2, theta2))
    return value


def _distance_iterations(theta1, theta2, kernel, gamma, tol, max_iter,
                         log_domain):
    eps = kernel.epsilon
    frac = gamma / (gamma + eps)
    p = theta1.shape[0]
    if log_domain:
        lt1 = np.log(theta1 + LOG_FLOOR)
        lt2 = np.log(theta2 + LOG_FLOOR)
        lv = np.zeros(p)
        converged = False
        for _ in range(max_iter):
            lu = frac * (lt1 - kernel.log_apply(lv))
            lv_new = frac * (lt2 - kernel.log_apply_transpose(lu))
            err = np.abs(lv_new - lv).max()
            lv = lv_new
            if err < tol:
                converged = True
                break
        m1 = np.exp(lu + kernel.log_apply(lv))
        m2 = np.exp(lv + kernel.log_apply_transpose(lu))
        return m1, m2, lu, lv, converged, True
    v = np.ones(p)
    converged = False
    for _ in range(max_iter):
        u = _ratio(theta1, kernel.apply(v)) ** frac
        v_new = _ratio(theta2, kernel.apply_transpose(u)) ** frac
        if not (np.isfinite(u).all() and np.isfinite(v_new).all()):
            return None
        err = np.abs(v_new - v).max() / max(1.0, v.max(), v_new.max())
        v = v_new
        if err < tol:
            converged = True
            break
    m1 = u * kernel.apply(v)
    m2 = v * kernel.apply_transpose(u)
    with np.errstate(divide="ignore"):
        lu, lv = np.log(u), np.log(v)
    return m1, m2, lu, lv, converged, False


def unbalanced_distance(theta1, theta2, kernel: Kernel, gamma: float,
                        tol: float = 1e-10, max_iter: int = 10000):
    """Unbalanced transport cost between two nonnegative vectors.

    Runs two-marginal scaling iterations to solve the dual, then returns
    the primal cost of the induced plan computed from dual quantities.
    The value is exactly 0 when either input has zero mass, and is always
    bounded below by ``-epsilon * p**2``. Overflow in the linear domain
    triggers an automatic log-domain retry.

    Returns
    -------
    value : float
    scalings : ScalingState
        (p, 1)-shaped scaling state of the run.
    converged : bool
    """
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    p = theta1.shape[0]
    trivial = ScalingState(u=np.zeros((p, 1)), v=np.zeros((p, 1)))
    if theta1.sum() == 0.0 or theta2.sum() == 0.0:
        return 0.0, trivial, True

    out = _distance_iterations(theta1, theta2, kernel, gamma, tol, max_iter,
                               log_domain=False)
    if out is None:
        out = _distance_iterations(theta1, theta2, kernel, gamma, tol,
                                   max_iter, log_domain=True)
    m1, m2, lu, lv, converged, log_domain = out
    if not converged:
        warnings.warn("distance iterations hit the budget",
                      ConvergenceWarning)
    eps = kernel.epsilon
    dot_m1 = float(np.sum(m1[m1 > 0] * lu[m1 > 0]))
    dot_m2 = float(np.sum(m2[m2 > 0] * lv[m2 > 0]))
    value = eps * (dot_m1 + dot_m2 - m1.sum())
    value += gamma * (kl_div(m1, theta1) + kl_div(m2, theta2))
    if log_domain:
        scalings = ScalingState(log_domain=True, log_u=lu[:, None],
                                log_v=lv[:, None])
    else:
        scalings = ScalingState(u=np.exp(lu[:, None]), v=np.exp(lv[:, None]))
    return value, scalings, converged
