"""Figure rendering for the report paths (sweep curves, evaluation summaries)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def save_sweep_figure(rows: Sequence[tuple[float, float]], path: str | Path) -> None:
    """Accuracy-vs-threshold curve with the best threshold marked."""
    thresholds = [t for t, _ in rows]
    accuracies = [a for _, a in rows]
    best = max(range(len(rows)), key=lambda i: accuracies[i])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(thresholds, accuracies, marker="o", markersize=3, lw=1.2)
    ax.axvline(thresholds[best], color="tab:red", lw=0.8, ls="--",
               label=f"best {thresholds[best]:.2f} m ({accuracies[best]:.3f})")
    ax.set_xlabel("height threshold [m]")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower center")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_metrics_figure(metrics: dict, path: str | Path) -> None:
    """Confusion-count bars annotated with accuracy and true-positive rate."""
    names = ["tp", "fp", "tn", "fn"]
    counts = [metrics.get(n, 0) for n in names]

    fig, ax = plt.subplots(figsize=(5, 4))
    bars = ax.bar(names, counts, color=["tab:green", "tab:red", "tab:blue", "tab:orange"])
    ax.bar_label(bars)
    acc = metrics.get("accuracy")
    tpr = metrics.get("true_positive_rate")
    title = []
    if acc is not None:
        title.append(f"accuracy {acc:.3f}")
    if tpr is not None:
        title.append(f"TPR {tpr:.3f}")
    ax.set_title("  /  ".join(title) or "evaluation")
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
