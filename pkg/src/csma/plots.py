"""Figure rendering for the CLI report paths. Headless by construction:
the Agg backend is forced before pyplot loads, so no display is needed."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import EmptyInputError


def save_loss_curves(per_layer_losses, path) -> None:
    """One training-loss line per stacked layer, log-scaled y axis."""
    if not per_layer_losses or not any(len(v) for v in per_layer_losses):
        raise EmptyInputError("no loss history to plot")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for i, losses in enumerate(per_layer_losses):
        ax.plot(range(1, len(losses) + 1), losses, label=f"layer {i + 1}")
    ax.set_xlabel("epoch")
    ax.set_ylabel("summed training loss")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_roc_curve(roc, auc: float, path) -> None:
    if not roc:
        raise EmptyInputError("no ROC points to plot")
    fpr = [p[0] for p in roc]
    tpr = [p[1] for p in roc]
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    ax.plot(fpr, tpr, marker=".", markersize=3, label=f"AUC = {auc:.4f}")
    ax.plot([0, 1], [0, 1], linestyle="--", color="gray", linewidth=1)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="lower right")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_confusion_matrix(confusion, path) -> None:
    """2x2 heat map with counts and row percentages in each cell."""
    counts = np.asarray(confusion, dtype=np.int64)
    fig, ax = plt.subplots(figsize=(4.4, 4.0))
    ax.imshow(counts, cmap="Blues")
    names = ("minor", "adult")
    for i in range(2):
        row_total = counts[i].sum()
        for j in range(2):
            pct = 100.0 * counts[i, j] / row_total if row_total else 0.0
            ax.text(j, i, f"{counts[i, j]}\n{pct:.2f}%",
                    ha="center", va="center")
    ax.set_xticks((0, 1), labels=names)
    ax.set_yticks((0, 1), labels=names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
