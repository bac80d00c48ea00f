"""Figures written next to the delimited reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bench import CLOSED_FORM, ITERATIVE, BenchRow  # noqa: E402

_STYLE = {
    "font.size": 10,
    "axes.titlesize": 11,
    "axes.labelsize": 10,
    "legend.fontsize": 9,
    "figure.dpi": 120,
}


def plot_scaling(rows: list[BenchRow], path, slopes: dict | None = None) -> None:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.4))
        for mode, marker in ((ITERATIVE, "o"), (CLOSED_FORM, "s")):
            pts = sorted((r.N, r.wall_ms) for r in rows if r.mode == mode)
            label = mode
            if slopes and mode in slopes:
                label += f" (slope {slopes[mode]:.2f})"
            ax.loglog([p[0] for p in pts], [p[1] for p in pts], marker=marker, label=label)
        ax.set_xlabel("pixels per sub-map N")
        ax.set_ylabel("wall time [ms]")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(loc="upper left")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_score_maps(scores: np.ndarray, path, labels: np.ndarray | None = None,
                    baseline: np.ndarray | None = None, title: str = "") -> None:
    """Score map panel, optionally beside raw scores and ground truth."""
    panels = []
    if baseline is not None:
        panels.append(("raw scores", baseline, "magma"))
    panels.append(("refined scores" if baseline is not None else "scores", scores, "magma"))
    if labels is not None:
        shown = np.where(labels == 255, np.nan, labels.astype(float))
        panels.append(("ground truth", shown, "gray"))
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(1, len(panels), figsize=(3.2 * len(panels), 3.2), squeeze=False)
        for ax, (name, data, cmap) in zip(axes[0], panels):
            im = ax.imshow(data, cmap=cmap, interpolation="nearest")
            ax.set_title(name)
            ax.set_xticks([])
            ax.set_yticks([])
            if name != "ground truth":
                fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
