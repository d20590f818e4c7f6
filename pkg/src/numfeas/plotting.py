"""Figure rendering for trajectory reports.

Kept separate from the CSV path: figures are a convenience view on the same
data and are only rendered when a figure path is requested.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _style(ax, xlabel, ylabel, title):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)


def save_error_trajectory(path, times, errors, label, title="", xlabel="t"):
    """Semilog error trajectory ||x - x*|| over time or iteration count."""
    fig, ax = plt.subplots(figsize=(6, 4))
    errors = np.asarray(errors, dtype=float)
    positive = errors > 0
    if positive.any():
        ax.semilogy(np.asarray(times)[positive], errors[positive], label=label)
    _style(ax, xlabel, "error", title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_comparison(path, curves, title="", threshold=None):
    """Overlay of labeled (times, errors) error curves on one semilog axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, times, errors in curves:
        errors = np.asarray(errors, dtype=float)
        positive = errors > 0
        if positive.any():
            ax.semilogy(np.asarray(times)[positive], errors[positive], label=label)
    if threshold is not None:
        ax.axhline(threshold, color="gray", linestyle="--", linewidth=1)
    _style(ax, "t", "error", title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
