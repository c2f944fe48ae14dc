"""Deterministic SVG figures (no timestamps, fixed hash salt)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "hybridfa"


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def learning_curves(path: Path, curves: Mapping[str, np.ndarray], xlabel: str = "episode",
                    ylabel: str = "reward (100-episode moving average)") -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in curves.items():
        ax.plot(np.arange(1, len(y) + 1), y, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def sweep_chart(path: Path, rows: Sequence[tuple], parameter: str) -> Path:
    """Rate vs swept value, one line per (L, mode)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    series: dict[tuple, list] = {}
    for r in rows:
        series.setdefault((r[2], r[3]), []).append((r[1], r[5]))
    for (L, mode), pts in series.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                linestyle="-" if mode == "fa" else "--", label=f"{mode.upper()}, L={L}")
    ax.set_xlabel(parameter)
    ax.set_ylabel("hybrid rate [bit/s/Hz]")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def mse_scatter(path: Path, rows: Sequence[tuple]) -> Path:
    """Closed form vs Monte-Carlo MSE on log axes."""
    fig, ax = plt.subplots(figsize=(5, 5))
    cf = np.array([r[6] for r in rows])
    mc = np.array([r[7] for r in rows])
    ax.loglog(cf, mc, "o")
    lo, hi = min(cf.min(), mc.min()), max(cf.max(), mc.max())
    ax.plot([lo, hi], [lo, hi], "k--", lw=1)
    ax.set_xlabel("closed-form MSE")
    ax.set_ylabel("Monte-Carlo MSE")
    ax.grid(alpha=0.3)
    return _save(fig, path)
