"""Static figures of a simulated path (full window plus a zoom near the stop)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .simulator import PathResult  # noqa: E402

ZOOM_FRACTION = 0.05


def agent_labels(n_total: int, n_uncertain: int):
    return ([f"U{j + 1}" for j in range(n_uncertain)]
            + [f"C{j + 1}" for j in range(n_total - n_uncertain)])


def _panels(path: PathResult, series, labels, ylabel, title):
    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    t = path.times
    zoom = t >= path.t_stop * (1.0 - ZOOM_FRACTION)
    for ax, mask, sub in ((axes[0], slice(None), "full window"), (axes[1], zoom, "zoom")):
        for col, label in zip(np.atleast_2d(series.T), labels):
            ax.plot(t[mask], col[mask], label=label, lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        ax.set_title(f"{title} ({sub})")
        ax.grid(alpha=0.3)
    axes[0].legend()
    fig.tight_layout()
    return fig


def save_path_figures(path: PathResult, out_dir, stem: str = "path"):
    """Write inventory, rate and price figures; returns the file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = agent_labels(path.inventories.shape[1], path.n_uncertain)
    jobs = [("inventories", path.inventories, labels, "X"),
            ("rates", path.rates, labels, "theta"),
            ("price", path.exec_price[:, None], ["S_exc"], "price")]
    written = []
    for name, series, labs, ylabel in jobs:
        fig = _panels(path, series, labs, ylabel, name)
        target = out_dir / f"{stem}_{name}.png"
        fig.savefig(target, dpi=110, metadata={"Software": None})
        plt.close(fig)
        written.append(target)
    return written
