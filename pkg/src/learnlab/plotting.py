"""Figures for experiment reports, rendered headless to image files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

BAND_EDGES = (2.0, 3.0)


def plot_r2_by_seed(seeds, r2_model1, r2_model3, path, reference=None) -> None:
    """Grouped bars of holdout R² per seed for both models."""
    x = np.arange(len(seeds))
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.bar(x - 0.2, r2_model1, 0.4, label="Model 1 (structured)")
    ax.bar(x + 0.2, r2_model3, 0.4, label="Model 3 (+ sentiment)")
    if reference is not None:
        for value, style in zip(reference, ("--", ":")):
            ax.axhline(value, color="grey", linestyle=style, linewidth=1)
    ax.set_xticks(x, [str(s) for s in seeds])
    ax.set_xlabel("seed")
    ax.set_ylabel("holdout R²")
    ax.set_ylim(0, 1)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sentiment_scores(scores, path) -> None:
    """Histogram of per-student sentiment scores with band boundaries marked."""
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    ax.hist(scores, bins=np.linspace(0, 4, 33), color="tab:blue", edgecolor="white")
    for edge in BAND_EDGES:
        ax.axvline(edge, color="black", linewidth=1)
    ax.set_xlim(0, 4)
    ax.set_xlabel("sentiment score (0 negative, 4 positive)")
    ax.set_ylabel("students")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
