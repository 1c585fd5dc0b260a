"""SVG renderings of directional std curves and delta E histograms.

Plot emission only; matplotlib is imported lazily so headless pipelines that
skip SVG output never load it.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from .analysis import DeltaEHistogram
from .noise_model import DirectionalStd, FitResult

_DIRECTION_STYLE = {"v1": "tab:red", "v2": "tab:blue", "v3": "tab:green"}


def _save_atomic(fig, path: str | Path) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    os.close(fd)
    try:
        fig.savefig(tmp, format="svg")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_directional_std_svg(stds: Sequence[DirectionalStd], path: str | Path,
                             fits: dict[str, FitResult] | None = None,
                             title: str = "Directional standard deviations") -> None:
    """Scatter sigma vs X+Y+Z per direction, with optional fitted lines."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    sums = np.array([s.sum_xyz for s in stds])
    for direction, color in _DIRECTION_STYLE.items():
        sigmas = np.array([s.sigma(direction) for s in stds])
        ax.scatter(sums, sigmas, s=14, color=color, label=direction, alpha=0.7)
        if fits and direction in fits:
            grid = np.linspace(0.0, float(sums.max()) * 1.05, 32)
            ax.plot(grid, fits[direction].k * grid, color=color, linewidth=1)
    ax.set_xlabel("X + Y + Z")
    ax.set_ylabel("standard deviation")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save_atomic(fig, path)
    plt.close(fig)


def save_delta_e_histogram_svg(histograms: Sequence[DeltaEHistogram],
                               path: str | Path,
                               title: str = "Delta E distribution") -> None:
    """Step plot of one or more histograms on shared axes."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for hist in histograms:
        edges = np.array(hist.bin_edges)
        finite_max = edges[np.isfinite(edges)].max()
        edges = np.where(np.isfinite(edges), edges, finite_max * 1.1)
        ax.stairs(hist.counts, edges,
                  label=f"{hist.grouping} (mean {hist.mean:.2f}, n={hist.sample_count})")
    ax.set_xlabel("delta E (CIE76)")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    _save_atomic(fig, path)
    plt.close(fig)
