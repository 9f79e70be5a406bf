"""Small matplotlib charts for CLI reports (Agg backend, no timestamps in output)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_META = {"Software": None}


def line_chart(xs: Sequence[float], ys: Sequence[float], path, *, xlabel: str, ylabel: str, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5), dpi=100)
    ax.plot(list(xs), list(ys), marker="o")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_META)
    plt.close(fig)
    return Path(path)


def bar_chart(labels: Sequence[str], values: Sequence[float | None], path, *, ylabel: str, title: str = "") -> Path:
    heights = [0.0 if v is None else float(v) for v in values]
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(labels) + 2), 3.5), dpi=100)
    ax.bar(range(len(heights)), heights)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(list(labels), rotation=45, ha="right")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_META)
    plt.close(fig)
    return Path(path)
