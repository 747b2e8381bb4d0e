"""PNG figures written next to the delimited reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy.cluster.hierarchy import dendrogram as draw_dendrogram  # noqa: E402

from mcps_forge.analyze import BootstrapEstimate, Dendrogram, SimilarityMatrix, TrajectorySet  # noqa: E402

# no software/version stamp, so reruns give byte-identical files
PNG_METADATA = {"Software": None}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=100, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def plot_similarity(matrix: SimilarityMatrix, path: Path) -> Path:
    n = len(matrix.run_ids)
    fig, ax = plt.subplots(figsize=(max(4, 0.3 * n + 2), max(3.5, 0.3 * n + 1.5)))
    im = ax.imshow(matrix.values, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(n), matrix.run_ids, rotation=90, fontsize=7)
    ax.set_yticks(range(n), matrix.run_ids, fontsize=7)
    ax.set_title(f"pipeline similarity (mean {matrix.mean_similarity:.3f})")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    return _save(fig, path)


def plot_dendrogram(tree: Dendrogram, path: Path) -> Path:
    n = len(tree.leaves)
    fig, ax = plt.subplots(figsize=(max(4, 0.35 * n + 2), 3.5))
    draw_dendrogram(tree.linkage_matrix(), labels=tree.leaves, ax=ax, leaf_rotation=90,
                    leaf_font_size=7, color_threshold=0)
    ax.set_ylabel("1 - similarity")
    ax.set_title("complete linkage")
    fig.tight_layout()
    return _save(fig, path)


def plot_trajectories(ts: TrajectorySet, path: Path, title: str = "best CV error over time") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for row in ts.values:
        ax.step(ts.grid, row, where="post", color="0.75", linewidth=0.8)
    ax.fill_between(ts.grid, ts.minimum, ts.maximum, step="post", alpha=0.2, color="C0")
    ax.step(ts.grid, ts.median, where="post", color="C0", linewidth=1.6, label="median")
    ax.set_xlabel("seconds")
    ax.set_ylabel("best CV error so far")
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.legend(loc="upper right")
    fig.tight_layout()
    return _save(fig, path)


def plot_estimates(labels: Sequence[str], estimates: Sequence[BootstrapEstimate | None], path: Path,
                   ylabel: str = "holdout error") -> Path:
    fig, ax = plt.subplots(figsize=(max(3.5, 1.2 * len(labels) + 1.5), 3.2))
    xs = np.arange(len(labels))
    for x, est in zip(xs, estimates):
        if est is None:
            continue
        ax.errorbar([x], [est.mean], yerr=[[max(est.mean - est.ci_low, 0.0)], [max(est.ci_high - est.mean, 0.0)]],
                    fmt="o", capsize=4, color="C0")
    ax.set_xticks(xs, labels)
    ax.set_xlim(-0.6, len(labels) - 0.4)
    ax.set_ylabel(ylabel)
    ax.set_title("bootstrap mean and 95% interval")
    fig.tight_layout()
    return _save(fig, path)
