"""Figure rendering for the CLI report paths.

Figures are written next to the delimited/JSON outputs when --plot is
passed; nothing here is part of the numeric contract.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_max_history(history: np.ndarray, path: str, title: str = "running maximum"):
    """Semilog plot of the running maximum M(t)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(history[:, 0], history[:, 1], lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("M(t)")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_sweep(rows: list[dict], x_label: str, path: str):
    """Log-log overlay of the bound columns (and simulated T*) over the sweep."""
    xs = np.array([r["value"] for r in rows], dtype=float)
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    series = [
        ("lower_new_closed", "closed lower bound", "o-"),
        ("lower_new_constructive", "constructive lower bound", "s-"),
        ("lower_log", "log-form lower bound", "^-"),
        ("upper", "upper bound", "d-"),
        ("t_star_sim", "simulated T*", "x--"),
    ]
    for col, label, style in series:
        ys = np.array([r.get(col) if r.get(col) is not None else np.nan for r in rows], dtype=float)
        if np.all(np.isnan(ys)) or np.nanmax(ys) <= 0:
            continue
        ax.loglog(xs, ys, style, label=label, ms=4, lw=1.1)
    ax.set_xlabel(x_label)
    ax.set_ylabel("T* bound")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_identity_residuals(report: dict, path: str):
    """Residuals of the boundary identity across refinement levels."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for sample in report["samples"]:
        levels = np.arange(len(sample["residuals"]))
        ax.semilogy(levels, sample["residuals"], "o-", lw=1.1,
                    label=f"s={sample['arc']:.2f}, t={sample['t']:.2f}")
    ax.set_xlabel("refinement level (node doubling)")
    ax.set_ylabel("identity residual")
    ax.legend(fontsize=7)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
