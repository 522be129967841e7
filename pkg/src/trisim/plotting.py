"""SVG emission for embedding exports: class-colored scatters, per-class
angle histograms, and unfolded maps with fixed angular extents."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .manifold import TWO_PI

_CMAP = plt.get_cmap("tab10")


def _by_class(labels):
    labels = np.asarray(labels)
    for cls in sorted(set(int(v) for v in labels)):
        yield cls, labels == cls


def scatter_plot(points, labels, out_path, title="embedding scatter"):
    """2-d scatter, one color per digit class, equal axes."""
    points = np.asarray(points)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError(f"scatter needs (n, 2) points, got {points.shape}")
    fig, ax = plt.subplots(figsize=(6, 6))
    for cls, mask in _by_class(labels):
        ax.scatter(points[mask, 0], points[mask, 1], s=4, color=_CMAP(cls),
                   label=str(cls))
    ax.set_xlabel("e1")
    ax.set_ylabel("e2")
    ax.set_title(title)
    ax.set_aspect("equal")
    ax.legend(markerscale=3, fontsize=8, loc="upper right")
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return [out_path]


def histogram_plot(values, labels, out_path, bins=100, value_range=(0.0, TWO_PI),
                   title="per-class angle histogram"):
    """Overlaid per-class histograms of a single coordinate."""
    values = np.asarray(values).ravel()
    fig, ax = plt.subplots(figsize=(8, 4))
    for cls, mask in _by_class(labels):
        ax.hist(values[mask], bins=bins, range=value_range, histtype="step",
                color=_CMAP(cls), label=str(cls))
    ax.set_xlim(value_range)
    ax.set_xlabel(f"angle in [{value_range[0]:.3g}, {value_range[1]:.3g}]")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend(fontsize=8, ncol=5)
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return [out_path]


def map_plot(points, labels, out_path, title="unfolded map"):
    """Angular map: azimuth (last column, extent 2*pi) against the first polar
    angle (extent pi). With three angle columns, a companion file of per-axis
    histograms is written next to the main map."""
    points = np.asarray(points)
    if points.ndim != 2 or points.shape[1] not in (2, 3):
        raise ValueError(f"map needs (n, 2) or (n, 3) points, got {points.shape}")
    fig, ax = plt.subplots(figsize=(9, 4.5))
    for cls, mask in _by_class(labels):
        ax.scatter(points[mask, -1], points[mask, 0], s=4, color=_CMAP(cls),
                   label=str(cls))
    ax.set_xlim(0.0, TWO_PI)
    ax.set_ylim(0.0, np.pi)
    ax.set_xlabel("azimuth in [0, 2pi]")
    ax.set_ylabel("polar angle in [0, pi]")
    ax.set_title(title)
    ax.legend(markerscale=3, fontsize=8, ncol=5)
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    written = [out_path]
    if points.shape[1] == 3:
        stem, dot, ext = str(out_path).rpartition(".")
        companion = f"{stem}_projections.{ext}" if dot else f"{out_path}_projections"
        fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
        extents = [np.pi, np.pi, TWO_PI]
        for col, axis in enumerate(axes):
            for cls, mask in _by_class(labels):
                axis.hist(points[mask, col], bins=60, range=(0.0, extents[col]),
                          histtype="step", color=_CMAP(cls))
            axis.set_xlim(0.0, extents[col])
            axis.set_xlabel(f"angle {col + 1} in [0, {extents[col]:.3g}]")
        fig.suptitle("per-axis projections")
        fig.savefig(companion, format="svg")
        plt.close(fig)
        written.append(companion)
    return written
