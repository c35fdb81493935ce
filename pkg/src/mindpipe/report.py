"""Report rendering: delimited outputs with matplotlib figures beside them."""

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

HISTORY_FIELDS = ("episode", "step", "start", "end", "silhouette", "reward")


def save_history_csv(history, path):
    """Write one optimization step per row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_FIELDS)
        for record in history:
            writer.writerow([
                record.episode,
                record.step,
                record.zone.start,
                record.zone.end,
                repr(record.breakdown.silhouette),
                repr(record.breakdown.reward),
            ])


def plot_history(history, path):
    """Reward trace over global steps with the running best."""
    rewards = np.array([r.breakdown.reward for r in history])
    best = np.maximum.accumulate(rewards)
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(rewards, lw=0.8, alpha=0.7, label="step reward")
    ax.plot(best, lw=1.5, label="best so far")
    ax.set_xlabel("global step")
    ax.set_ylabel("reward")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_metrics_csv(metrics, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["accuracy", repr(metrics.accuracy)])
        writer.writerow(["macro_precision", repr(metrics.macro_precision)])
        writer.writerow(["macro_recall", repr(metrics.macro_recall)])
        writer.writerow(["macro_f1", repr(metrics.macro_f1)])


def save_confusion_csv(metrics, path):
    np.savetxt(path, metrics.confusion, fmt="%d", delimiter=",")


def plot_confusion(metrics, path, class_names=None):
    """Confusion-matrix heatmap with per-cell counts."""
    confusion = metrics.confusion
    n = confusion.shape[0]
    names = class_names or [str(i) for i in range(n)]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(confusion, cmap="Blues")
    ax.set_xticks(range(n), names)
    ax.set_yticks(range(n), names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    threshold = confusion.max() / 2 if confusion.max() else 0.5
    for i in range(n):
        for j in range(n):
            ax.text(j, i, str(confusion[i, j]), ha="center", va="center",
                    color="white" if confusion[i, j] > threshold else "black",
                    fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_title(f"accuracy {metrics.accuracy:.4f}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_reward_accuracy(rewards, accuracies, path):
    """Scatter of zone reward against trained-classifier accuracy."""
    rewards = np.asarray(rewards, dtype=float)
    accuracies = np.asarray(accuracies, dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.scatter(rewards, accuracies, s=28)
    if rewards.size >= 2 and rewards.std() > 0 and accuracies.std() > 0:
        corr = float(np.corrcoef(rewards, accuracies)[0, 1])
        slope, intercept = np.polyfit(rewards, accuracies, 1)
        xs = np.linspace(rewards.min(), rewards.max(), 50)
        ax.plot(xs, slope * xs + intercept, "--", lw=1, color="gray")
        ax.set_title(f"correlation {corr:.4f}")
    ax.set_xlabel("zone reward")
    ax.set_ylabel("test accuracy")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
