"""Render evaluation reports as figures next to their delimited output.

All functions write image files and return the path written; nothing here
feeds back into the numbers.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import EvalReport, SweepReport


def plot_accuracy_histogram(report: EvalReport, path: str | Path) -> Path:
    """Histogram of per-run accuracies with the mean marked."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(report.accuracies, bins=30, color="steelblue", alpha=0.8)
    ax.axvline(report.mean_accuracy, color="crimson", linestyle="--",
               label=f"mean {report.mean_accuracy:.4f} ± {report.ci95:.4f}")
    ax.set_xlabel("episode accuracy")
    ax.set_ylabel("runs")
    ax.set_title(
        f"{report.ways}-way {report.shots}-shot, Q={report.queries}, "
        f"{report.runs} runs"
    )
    ax.legend()
    fig.savefig(path, bbox_inches="tight", dpi=120)
    plt.close(fig)
    return path


def plot_sweep(sweep_report: SweepReport, path: str | Path) -> Path:
    """Accuracy vs kappa, one line per alpha, one panel per k."""
    path = Path(path)
    reports = sweep_report.reports()
    k_values = sorted({r.k for r in reports})
    alpha_values = sorted({r.alpha for r in reports})
    fig, axes = plt.subplots(
        len(k_values), 1, figsize=(6, 3 * len(k_values)), squeeze=False, sharex=True
    )
    for ax, k in zip(axes[:, 0], k_values):
        for alpha in alpha_values:
            points = sorted(
                [(r.kappa, r.mean_accuracy, r.ci95) for r in reports
                 if r.k == k and r.alpha == alpha]
            )
            if not points:
                continue
            kappas, means, cis = zip(*points)
            ax.errorbar(kappas, means, yerr=cis, marker="o", capsize=3,
                        label=f"alpha={alpha}")
        ax.set_ylabel(f"accuracy (k={k})")
        ax.legend(fontsize=8)
    axes[-1, 0].set_xlabel("kappa")
    fig.savefig(path, bbox_inches="tight", dpi=120)
    plt.close(fig)
    return path


def plot_imbalance(results: Sequence[tuple[int, EvalReport]], path: str | Path) -> Path:
    """Accuracy as a function of q1 with CI error bars."""
    path = Path(path)
    q1s = [q1 for q1, _ in results]
    means = [r.mean_accuracy for _, r in results]
    cis = [r.ci95 for _, r in results]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(q1s, means, yerr=cis, marker="o", capsize=3)
    ax.set_xlabel("q1 (queries in the first class)")
    ax.set_ylabel("accuracy")
    ax.set_title("2-way accuracy under query imbalance")
    fig.savefig(path, bbox_inches="tight", dpi=120)
    plt.close(fig)
    return path


def plot_embedding(
    coordinates: np.ndarray, labels: np.ndarray, path: str | Path
) -> Path:
    """Scatter of the first two embedding coordinates, colored by class."""
    path = Path(path)
    coords = np.asarray(coordinates)
    fig, ax = plt.subplots(figsize=(6, 5))
    xs = coords[:, 0]
    ys = coords[:, 1] if coords.shape[1] > 1 else np.zeros_like(xs)
    scatter = ax.scatter(xs, ys, c=np.asarray(labels), cmap="tab10", s=24)
    ax.set_xlabel("coordinate 0")
    ax.set_ylabel("coordinate 1")
    ax.set_title("Laplacian embedding of one episode graph")
    fig.colorbar(scatter, ax=ax, label="class")
    fig.savefig(path, bbox_inches="tight", dpi=120)
    plt.close(fig)
    return path
