"""Figures for the ``report`` command.

Everything renders through the Agg backend to PNG files with the software
tag stripped, so reruns produce identical bytes.
"""

from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .weighting import HEALTHY, PD  # noqa: E402

GROUP_COLORS = {HEALTHY: "#1f77b4", PD: "#d62728"}

RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "svg.hashsalt": "pdvoice",
}


def figsize(width=6.0, ratio=None):
    ratio = ratio or (np.sqrt(5.0) - 1.0) / 2.0
    return (width, width * ratio)


@contextmanager
def figure(path, width=6.0, ratio=None, ncols=1):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(1, ncols, figsize=figsize(width, ratio))
        try:
            yield fig, ax
            fig.tight_layout()
            fig.savefig(Path(path), metadata={"Software": None})
        finally:
            plt.close(fig)


def plot_metrics(record: dict, path) -> Path:
    names = ["accuracy", "sensitivity", "specificity", "mcc", "pe"]
    values = [float(record[n]) for n in names]
    with figure(path) as (fig, ax):
        bars = ax.bar(names, values, color="#4c72b0")
        for bar, v in zip(bars, values):
            ax.annotate(f"{v:.3f}", (bar.get_x() + bar.get_width() / 2, v),
                        ha="center", va="bottom", fontsize=8)
        ax.set_ylim(min(0.0, min(values)) - 0.05, 1.1)
        ax.axhline(0, color="black", lw=0.6)
        ax.set_title(f"{record.get('mode', '')}  n={record.get('n', '')}")
    return Path(path)


def plot_folds(rows: Sequence[dict], path) -> Path:
    folds = [int(r["fold"]) for r in rows]
    acc = [float(r["accuracy"]) for r in rows]
    with figure(path) as (fig, ax):
        ax.bar(folds, acc, color="#55a868", width=0.8)
        ax.set_xlabel("fold")
        ax.set_ylabel("accuracy")
        ax.set_ylim(0, 1.05)
        ax.axhline(float(np.mean(acc)), color="black", ls="--", lw=0.8, label="fold mean")
        ax.legend(loc="lower right")
    return Path(path)


def plot_sweep(rows: Sequence[dict], path, top: int = 25) -> Path:
    rows = list(rows)[:top]
    labels = [r["subset"] for r in rows]
    acc = [float(r["accuracy"]) for r in rows]
    mcc = [float(r["mcc"]) for r in rows]
    x = np.arange(len(rows))
    with figure(path, width=7.0) as (fig, ax):
        ax.bar(x - 0.2, acc, width=0.4, label="accuracy")
        ax.bar(x + 0.2, mcc, width=0.4, label="MCC")
        ax.set_xticks(x, labels, rotation=60, ha="right")
        ax.set_xlabel("coefficient subset (ranked)")
        ax.set_ylim(min(0.0, min(mcc)) - 0.05, 1.05)
        ax.legend(loc="upper right")
    return Path(path)


def plot_voiceprints(voiceprints, path) -> Path:
    """Group mean voiceprint with a one-standard-deviation band."""
    orders = voiceprints[0].orders or list(range(1, voiceprints[0].values.size + 1))
    with figure(path) as (fig, ax):
        for label in (HEALTHY, PD):
            group = np.array([vp.values for vp in voiceprints if vp.label == label])
            if group.size == 0:
                continue
            mean, sd = group.mean(axis=0), group.std(axis=0)
            ax.plot(orders, mean, marker="o", ms=3, color=GROUP_COLORS[label],
                    label=f"{label} (n={len(group)})")
            ax.fill_between(orders, mean - sd, mean + sd, color=GROUP_COLORS[label], alpha=0.2)
        ax.set_xlabel("cepstral coefficient")
        ax.set_ylabel("weighted value")
        ax.set_xticks(orders)
        ax.legend()
    return Path(path)


def plot_loss(losses: Sequence[float], path) -> Path:
    with figure(path) as (fig, ax):
        ax.plot(np.arange(1, len(losses) + 1), losses, color="#8172b2")
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean squared error / 2")
        ax.set_yscale("log")
    return Path(path)
