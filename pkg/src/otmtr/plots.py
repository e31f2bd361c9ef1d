"""Figure rendering for report outputs, alongside the delimited files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_objective_trace", "plot_bench_curves"]


def plot_objective_trace(trace, delta_trace, path) -> None:
    """Objective and coefficient-change traces of one fit."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    iters = np.arange(1, len(trace) + 1)
    axes[0].plot(iters, trace, lw=1.5)
    axes[0].set_xlabel("outer iteration")
    axes[0].set_ylabel("objective")
    axes[1].semilogy(iters, np.maximum(delta_trace, 1e-300), lw=1.5,
                     color="tab:orange")
    axes[1].set_xlabel("outer iteration")
    axes[1].set_ylabel("relative coefficient change")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_bench_curves(rows, path) -> None:
    """Mean AUC per model against the support overlap fraction.

    ``rows`` are dicts with keys model, overlap, seed, auc.
    """
    models = sorted({r["model"] for r in rows})
    overlaps = sorted({r["overlap"] for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    for model in models:
        means, stds = [], []
        for ov in overlaps:
            vals = [r["auc"] for r in rows
                    if r["model"] == model and r["overlap"] == ov]
            means.append(np.mean(vals))
            stds.append(np.std(vals))
        ax.errorbar(overlaps, means, yerr=stds, marker="o", capsize=3,
                    label=model)
    ax.set_xlabel("support overlap fraction")
    ax.set_ylabel("mean PR-AUC of best swept fit")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
