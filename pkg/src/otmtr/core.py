"""Domain types, validation and hyperparameter resolution.

All types are plain dataclasses holding numpy arrays. They are treated as
immutable after construction and are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    DegenerateMassError,
    EmptyProblemError,
    NonFiniteError,
    ShapeMismatchError,
    ZeroMedianError,
)

__all__ = [
    "MultiTaskProblem",
    "MtwHyperparams",
    "GroundMetric",
    "FitReport",
    "validate_problem",
    "standardize_problem",
    "resolve_gamma",
    "resolve_epsilon",
]


@dataclass(frozen=True)
class MultiTaskProblem:
    """A collection of T regression tasks sharing the same feature space.

    Attributes
    ----------
    designs : tuple of ndarray, each (n, p)
        Per-task design matrices.
    targets : tuple of ndarray, each (n,)
        Per-task regression targets.
    n, p, n_tasks : int
        Samples per task, feature count, number of tasks.
    """

    designs: tuple
    targets: tuple
    n: int
    p: int
    n_tasks: int

    @classmethod
    def from_arrays(cls, designs: Sequence[np.ndarray],
                    targets: Sequence[np.ndarray]) -> "MultiTaskProblem":
        designs = tuple(np.asarray(X, dtype=float) for X in designs)
        targets = tuple(np.asarray(y, dtype=float).ravel() for y in targets)
        if len(designs) == 0:
            raise EmptyProblemError("need at least one task")
        n, p = designs[0].shape if designs[0].ndim == 2 else (0, 0)
        return cls(designs=designs, targets=targets, n=n, p=p,
                   n_tasks=len(designs))


def validate_problem(problem: MultiTaskProblem) -> None:
    """Check shapes and finiteness of every design and target.

    Raises
    ------
    EmptyProblemError
        If T, n or p is zero.
    ShapeMismatchError
        If any design or target disagrees with the declared (n, p).
    NonFiniteError
        If any entry is NaN or Inf.
    """
    if problem.n_tasks < 1 or len(problem.designs) != problem.n_tasks:
        raise EmptyProblemError("problem declares no tasks")
    if problem.n < 1 or problem.p < 1:
        raise EmptyProblemError(
            f"degenerate sizes n={problem.n}, p={problem.p}")
    if len(problem.targets) != problem.n_tasks:
        raise ShapeMismatchError(
            f"{len(problem.designs)} designs but {len(problem.targets)} targets")
    for t, (X, y) in enumerate(zip(problem.designs, problem.targets)):
        if X.ndim != 2 or X.shape != (problem.n, problem.p):
            raise ShapeMismatchError(
                f"design {t} has shape {X.shape}, expected "
                f"({problem.n}, {problem.p})")
        if y.shape != (problem.n,):
            raise ShapeMismatchError(
                f"target {t} has shape {y.shape}, expected ({problem.n},)")
        if not np.isfinite(X).all():
            raise NonFiniteError(f"design {t} contains NaN/Inf")
        if not np.isfinite(y).all():
            raise NonFiniteError(f"target {t} contains NaN/Inf")


def standardize_problem(problem: MultiTaskProblem):
    """Rescale every design column to unit Euclidean norm, per task.

    Puts all penalty weights on one footing across features and tasks, so
    the regularization grids are comparable over a whole benchmark.
    Returns the rescaled problem and the (p, T) column scales; divide
    fitted coefficients by their scale column to return to the original
    basis. Zero-norm columns keep scale 1.
    """
    designs, scales = [], []
    for X in problem.designs:
        norm = np.linalg.norm(X, axis=0)
        norm = np.where(norm > 0, norm, 1.0)
        designs.append(X / norm)
        scales.append(norm)
    rescaled = MultiTaskProblem.from_arrays(designs, problem.targets)
    return rescaled, np.stack(scales, axis=1)


# JSON keys use 'lambda'; the dataclass field is lam because of the keyword.
_JSON_KEY_TO_FIELD = {"lambda": "lam"}
_FIELD_TO_JSON_KEY = {"lam": "lambda"}


@dataclass(frozen=True)
class MtwHyperparams:
    """Hyperparameters of the transport-regularized multi-task estimator.

    ``gamma="auto"`` resolves the marginal-relaxation weight from the input
    masses via :func:`resolve_gamma` at fit initialization and freezes it
    for the run.
    """

    mu: float = 1.0
    lam: float = 0.0
    epsilon: float = 0.01
    gamma: Union[float, str] = "auto"
    tau: float = 0.5
    max_outer: int = 2000
    tol_outer: float = 1e-5
    max_sinkhorn: int = 20
    tol_sinkhorn: float = 1e-4
    max_cd: int = 10000
    tol_cd: float = 1e-6
    positive: bool = False

    def validate(self) -> None:
        if self.mu < 0 or self.lam < 0:
            raise ValueError("mu and lambda must be >= 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.gamma != "auto" and not float(self.gamma) > 0:
            raise ValueError("gamma must be > 0 or 'auto'")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        for name in ("tol_outer", "tol_sinkhorn", "tol_cd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("max_outer", "max_sinkhorn", "max_cd"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def replace(self, **kwargs) -> "MtwHyperparams":
        return replace(self, **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "MtwHyperparams":
        kwargs = {}
        for key, value in d.items():
            kwargs[_JSON_KEY_TO_FIELD.get(key, key)] = value
        params = cls(**kwargs)
        params.validate()
        return params

    def to_dict(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            out[_FIELD_TO_JSON_KEY.get(name, name)] = getattr(self, name)
        return out


class GroundMetric:
    """Pairwise substitution cost between the p feature locations.

    Two forms are supported:

    - ``dense``: an explicit nonnegative (p, p) matrix with zero diagonal.
    - ``grid2d``: features laid out on an (h, w) pixel grid, row-major,
      with cost ``scale * squared Euclidean pixel distance``. The matrix
      is only materialized on request.
    """

    def __init__(self, kind, matrix=None, grid_shape=None, scale=1.0):
        self.kind = kind
        self.scale = float(scale)
        if kind == "dense":
            M = np.asarray(matrix, dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise ShapeMismatchError("dense metric must be square")
            if not np.isfinite(M).all():
                raise NonFiniteError("metric contains NaN/Inf")
            if (M < 0).any():
                raise ValueError("metric entries must be nonnegative")
            if np.diag(M).any():
                raise ValueError("metric diagonal must be zero")
            self.matrix = M * self.scale if self.scale != 1.0 else M
            self.scale = 1.0
            self.grid_shape = None
            self.p = M.shape[0]
            self.median_cost = float(np.median(self.matrix))
        elif kind == "grid2d":
            h, w = grid_shape
            if h < 1 or w < 1:
                raise EmptyProblemError("grid must be at least 1x1")
            self.matrix = None
            self.grid_shape = (int(h), int(w))
            self.p = int(h) * int(w)
            self.median_cost = self._grid_median()
        else:
            raise ValueError(f"unknown metric kind {kind!r}")

    @classmethod
    def dense(cls, matrix) -> "GroundMetric":
        return cls("dense", matrix=matrix)

    @classmethod
    def grid2d(cls, height: int, width: int, scale: float = 1.0) -> "GroundMetric":
        return cls("grid2d", grid_shape=(height, width), scale=scale)

    def _grid_median(self) -> float:
        # Exact median over all p^2 implicit entries, via value multiplicity:
        # the ordered pair count for an axis offset d on an axis of length L
        # is L - |d| (2(L - d) for d > 0).
        h, w = self.grid_shape
        dr = np.arange(h)
        dc = np.arange(w)
        wr = np.where(dr == 0, h, 2 * (h - dr)).astype(np.int64)
        wc = np.where(dc == 0, w, 2 * (w - dc)).astype(np.int64)
        vals = (self.scale * (dr[:, None] ** 2 + dc[None, :] ** 2)).ravel()
        weights = (wr[:, None] * wc[None, :]).ravel()
        order = np.argsort(vals, kind="stable")
        vals, weights = vals[order], weights[order]
        csum = np.cumsum(weights)
        total = csum[-1]
        lo_idx = (total - 1) // 2
        hi_idx = total // 2
        lo = vals[np.searchsorted(csum, lo_idx + 1)]
        hi = vals[np.searchsorted(csum, hi_idx + 1)]
        return float(0.5 * (lo + hi))

    def materialize(self) -> np.ndarray:
        """Return the full (p, p) cost matrix."""
        if self.kind == "dense":
            return self.matrix
        h, w = self.grid_shape
        rows, cols = np.divmod(np.arange(self.p), w)
        dr = rows[:, None] - rows[None, :]
        dc = cols[:, None] - cols[None, :]
        return self.scale * (dr.astype(float) ** 2 + dc.astype(float) ** 2)

    def normalized(self) -> "GroundMetric":
        """Return a copy rescaled so the median cost equals 1."""
        s = self.median_cost
        if s <= 0:
            raise ZeroMedianError("cannot normalize a metric with median 0")
        if self.kind == "dense":
            return GroundMetric.dense(self.matrix / s)
        h, w = self.grid_shape
        return GroundMetric.grid2d(h, w, scale=self.scale / s)


@dataclass(frozen=True)
class FitReport:
    """Outcome of one solver run."""

    coefficients: np.ndarray        # (p, T), positive minus negative part
    barycenter_pos: np.ndarray      # (p,)
    barycenter_neg: np.ndarray      # (p,)
    objective_trace: list
    delta_trace: list
    converged: bool
    iterations_used: int
    seconds_cd: float
    seconds_ot: float
    state: Optional[object] = field(default=None, repr=False, compare=False)


def resolve_gamma(params: MtwHyperparams, masses: Sequence[float]) -> float:
    """Resolve the marginal-relaxation weight gamma.

    An explicit ``params.gamma`` is passed through. In ``"auto"`` mode the
    weight is the mass-retention heuristic
    ``tau * (mean of sqrt(masses))**2``, which ties the barycenter mass to
    a tau-fraction of the inputs' root-mean mass.
    """
    if params.gamma != "auto":
        return float(params.gamma)
    masses = np.asarray(masses, dtype=float)
    if (masses < 0).any():
        raise ValueError("masses must be nonnegative")
    if not (masses > 0).any():
        raise DegenerateMassError("auto gamma needs at least one positive mass")
    return float(params.tau * np.mean(np.sqrt(masses)) ** 2)


def resolve_epsilon(metric: GroundMetric, p: int) -> float:
    """Entropy weight heuristic 1 / (s * p), s the metric's median cost."""
    s = metric.median_cost
    if s <= 0:
        raise ZeroMedianError("metric median cost is zero")
    return 1.0 / (s * p)
