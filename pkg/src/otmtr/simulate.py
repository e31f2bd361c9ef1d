"""Synthetic 2-D grid benchmark generation.

Ground-truth coefficients live on an (h, w) pixel grid, k-sparse per task
with a controlled fraction of support positions shared across tasks; the
non-shared positions are obtained by translating anchor pixels one or two
pixels along an axis, independently per task. The shared design matrix
composes a Gaussian blur with block-mean downsampling, and the noise
variance is calibrated so that sum_t ||X theta^t||^2 / (T sigma^2) equals
the squared target SNR exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import IndivisibleGridError, SupportCollisionError

__all__ = ["GridScenario", "GroundTruth", "make_design", "make_truth"]

# Axis-aligned moves of one or two pixels.
_SHIFTS = ((1, 0), (-1, 0), (2, 0), (-2, 0), (0, 1), (0, -1), (0, 2), (0, -2))


@dataclass(frozen=True)
class GridScenario:
    """Parameters of one synthetic benchmark draw."""

    grid: tuple = (24, 24)
    n_tasks: int = 3
    sparsity: int = 4
    overlap: float = 0.5
    snr: float = 3.0
    amp_range: tuple = (20.0, 30.0)
    blur_sigma: float = 1.0
    pool: tuple = (4, 4)
    seed: int = 0

    def validate(self) -> None:
        h, w = self.grid
        if self.sparsity < 1 or self.sparsity > h * w:
            raise ValueError("sparsity must lie in [1, p]")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError("overlap must lie in [0, 1]")
        if self.snr <= 0:
            raise ValueError("snr must be > 0")
        if self.n_tasks < 1:
            raise ValueError("need at least one task")

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid), "n_tasks": self.n_tasks,
            "sparsity": self.sparsity, "overlap": self.overlap,
            "snr": self.snr, "amp_range": list(self.amp_range),
            "blur_sigma": self.blur_sigma, "pool": list(self.pool),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridScenario":
        d = dict(d)
        for key in ("grid", "amp_range", "pool"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    coefficients: np.ndarray        # (p, T), nonnegative, k nonzeros/column
    supports: tuple                 # T sorted index arrays
    design: np.ndarray              # (n, p), shared across tasks
    targets: np.ndarray             # (T, n)
    sigma2: float
    scenario: GridScenario = field(repr=False, default=None)


def _blur_matrix_1d(length: int, sigma: float) -> np.ndarray:
    # Truncation at 4 sigma; zero boundary with per-row renormalization so
    # a constant image stays constant.
    if sigma <= 0:
        return np.eye(length)
    radius = int(np.ceil(4.0 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-offsets.astype(float) ** 2 / (2.0 * sigma ** 2))
    B = np.zeros((length, length))
    for i in range(length):
        cols = i + offsets
        ok = (cols >= 0) & (cols < length)
        weights = kernel[ok]
        B[i, cols[ok]] = weights / weights.sum()
    return B


def make_design(grid: tuple, blur_sigma: float = 1.0,
                pool: tuple = (4, 4)) -> np.ndarray:
    """Blur-then-pool forward operator as an explicit (n, p) matrix.

    Each output row is the mean over one (pool_h, pool_w) block of the
    Gaussian-blurred image; for a (24, 24) grid with (4, 4) pooling this
    gives 36 rows over 576 pixels.
    """
    h, w = grid
    ph, pw = pool
    if h % ph != 0 or w % pw != 0:
        raise IndivisibleGridError(f"grid {grid} not divisible by pool {pool}")
    blur = np.kron(_blur_matrix_1d(h, blur_sigma),
                   _blur_matrix_1d(w, blur_sigma))
    nb_r, nb_c = h // ph, w // pw
    pool_mat = np.zeros((nb_r * nb_c, h * w))
    inv_area = 1.0 / (ph * pw)
    for bi in range(nb_r):
        for bj in range(nb_c):
            row = bi * nb_c + bj
            for i in range(bi * ph, (bi + 1) * ph):
                pool_mat[row, i * w + bj * pw:i * w + (bj + 1) * pw] = inv_area
    return pool_mat @ blur


def _draw_supports(rng, grid, k, n_shared, n_tasks):
    h, w = grid
    p = h * w
    anchors = rng.choice(p, size=k, replace=False)
    shared = set(int(a) for a in anchors[:n_shared])
    claimed = set(shared)           # all non-shared placements stay distinct
    supports = [list(shared) for _ in range(n_tasks)]
    for anchor in anchors[n_shared:]:
        ai, aj = divmod(int(anchor), w)
        for t in range(n_tasks):
            candidates = []
            for di, dj in _SHIFTS:
                ni, nj = ai + di, aj + dj
                if 0 <= ni < h and 0 <= nj < w:
                    pos = ni * w + nj
                    if pos not in claimed:
                        candidates.append(pos)
            if not candidates:
                return None
            pos = candidates[rng.integers(len(candidates))]
            supports[t].append(pos)
            claimed.add(pos)
    return [np.array(sorted(s)) for s in supports]


def make_truth(scenario: GridScenario) -> GroundTruth:
    """Draw coefficients, design and noisy targets for one scenario.

    Deterministic in ``scenario.seed``. The shared support core has size
    ``round(overlap * sparsity)``; remaining anchor features are shifted
    by one or two pixels per task, all placements pairwise distinct, with
    up to 100 redraws before giving up.
    """
    scenario.validate()
    h, w = scenario.grid
    p = h * w
    k = scenario.sparsity
    T = scenario.n_tasks
    n_shared = int(round(scenario.overlap * k))
    rng = np.random.default_rng(scenario.seed)
    design = make_design(scenario.grid, scenario.blur_sigma, scenario.pool)

    supports = None
    for _ in range(100):
        supports = _draw_supports(rng, scenario.grid, k, n_shared, T)
        if supports is not None:
            break
    if supports is None:
        raise SupportCollisionError(
            "could not place translated supports after 100 attempts")

    lo, hi = scenario.amp_range
    amplitudes = rng.uniform(lo, hi, size=(k, T))
    coefficients = np.zeros((p, T))
    for t in range(T):
        coefficients[supports[t], t] = amplitudes[:, t]

    signal = design @ coefficients          # (n, T)
    sigma2 = float(np.sum(signal ** 2) / (T * scenario.snr ** 2))
    noise = rng.normal(0.0, np.sqrt(sigma2), size=(T, design.shape[0]))
    targets = signal.T + noise
    return GroundTruth(coefficients=coefficients,
                       supports=tuple(supports), design=design,
                       targets=targets, sigma2=sigma2, scenario=scenario)
