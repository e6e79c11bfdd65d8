"""Figure emission for benchmark reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def strength_curves(
    strengths: Sequence[float],
    series: dict[str, Sequence[float | None]],
    out_path: str | Path,
    xlabel: str = "perturbation strength",
    ylabel: str = "Pearson correlation",
    title: str | None = None,
) -> None:
    """Metric-vs-perturbation-strength curves, one line per condition."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for label, values in series.items():
        xs = [s for s, v in zip(strengths, values) if v is not None]
        ys = [v for v in values if v is not None]
        marker = "o" if len(ys) > 1 else "D"
        ax.plot(xs, ys, marker=marker, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def uncertainty_scatter(
    scores: Sequence[float],
    accuracies: Sequence[float],
    labels: Sequence[str],
    out_path: str | Path,
) -> None:
    """Ensemble uncertainty vs test accuracy, one point per candidate."""
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    ax.scatter(scores, accuracies)
    for s, a, label in zip(scores, accuracies, labels):
        ax.annotate(label, (s, a), fontsize=7, xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("ensemble uncertainty (mean std)")
    ax.set_ylabel("test Pearson correlation")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
