"""Figure rendering for the CLI report paths.

Each plotting command saves PNG files next to the delimited output it
illustrates: objective traces and plan heatmaps for fits, error-versus-k
curves (or a k-epsilon heatmap) for evaluations, and wall-time scaling
curves for benchmarks. Everything renders off-screen.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_METHOD_COLORS = {"raw": "tab:gray", "pca": "tab:blue", "ewca": "tab:orange"}


def plot_objective_trace(trace: np.ndarray, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    iterations = np.arange(1, len(trace) + 1)
    ax.plot(iterations, trace, marker="o", ms=3)
    ax.set_xlabel("outer iteration")
    ax.set_ylabel("objective")
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_plan_heatmap(
    plan: np.ndarray, path: str | Path, labels: np.ndarray | None = None
) -> None:
    """Heatmap of the coupling; with labels, samples are ordered by class and
    same-class blocks are outlined."""
    order = np.arange(plan.shape[0])
    if labels is not None:
        order = np.argsort(labels, kind="stable")
    shown = plan[np.ix_(order, order)]
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    im = ax.imshow(shown, cmap="viridis", interpolation="nearest")
    fig.colorbar(im, ax=ax, fraction=0.046)
    if labels is not None:
        sorted_labels = np.asarray(labels)[order]
        start = 0
        for cls in np.unique(sorted_labels):
            size = int((sorted_labels == cls).sum())
            ax.add_patch(
                plt.Rectangle(
                    (start - 0.5, start - 0.5), size, size,
                    fill=False, edgecolor="red", linewidth=1.2,
                )
            )
            start += size
    ax.set_xlabel("projected sample")
    ax.set_ylabel("sample")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_error_vs_k(rows: list[dict], path: str | Path) -> None:
    """Mean misclassification (percent) against k per method, quartile band."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    methods = sorted({row["method"] for row in rows})
    for method in methods:
        sub = sorted((r for r in rows if r["method"] == method), key=lambda r: r["k"])
        ks = [r["k"] for r in sub]
        color = _METHOD_COLORS.get(method)
        ax.plot(ks, [100 * r["mean"] for r in sub], marker="o", ms=4,
                label=method, color=color)
        ax.fill_between(ks, [100 * r["q1"] for r in sub], [100 * r["q3"] for r in sub],
                        alpha=0.2, color=color)
    ax.set_xlabel("subspace dimension k")
    ax.set_ylabel("misclassification rate (%)")
    ax.legend(frameon=False)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_error_heatmap(rows: list[dict], path: str | Path) -> None:
    """k-by-epsilon heatmap of mean misclassification (percent)."""
    grid_rows = [r for r in rows if r["method"] == "ewca"]
    ks = sorted({r["k"] for r in grid_rows})
    eps = sorted({r["epsilon"] for r in grid_rows})
    values = np.full((len(ks), len(eps)), np.nan)
    for r in grid_rows:
        values[ks.index(r["k"]), eps.index(r["epsilon"])] = 100 * r["mean"]
    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(values, cmap="viridis", aspect="auto", origin="lower")
    fig.colorbar(im, ax=ax, label="misclassification rate (%)")
    ax.set_xticks(range(len(eps)), [f"{e:.3g}" for e in eps], rotation=45)
    ax.set_yticks(range(len(ks)), [str(k) for k in ks])
    ax.set_xlabel("entropy intensity")
    ax.set_ylabel("subspace dimension k")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_timing(rows: list[dict], path: str | Path) -> None:
    """Wall time against data dimension per algorithm, quartile band."""
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for algo in sorted({row["algo"] for row in rows}):
        sub = sorted((r for r in rows if r["algo"] == algo), key=lambda r: r["d"])
        dims = [r["d"] for r in sub]
        ax.plot(dims, [r["mean"] for r in sub], marker="o", ms=4, label=algo)
        ax.fill_between(dims, [r["q1"] for r in sub], [r["q3"] for r in sub], alpha=0.2)
    ax.set_xlabel("data dimension d")
    ax.set_ylabel("wall time (s)")
    ax.set_yscale("log")
    ax.legend(frameon=False)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
