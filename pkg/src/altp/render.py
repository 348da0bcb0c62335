"""Overlay rendering (bit-exact PPM) and a matplotlib summary figure."""

from __future__ import annotations

import numpy as np

from .io import to_bytes8, write_ppm
from .model import ImageBuffer, PruneResult, SuperpixelMap, TokenGrid

OVERLAY_KINDS = ("segments", "density", "weights", "kept_tokens")
DROPPED_SHADE = 0.3
UNIFORM_SHADE = 0.5


def _rgb(image: ImageBuffer) -> np.ndarray:
    data = image.data
    return np.repeat(data, 3, axis=2) if image.channels == 1 else data.copy()


def boundary_mask(labels: np.ndarray) -> np.ndarray:
    """Pixels with at least one 4-neighbour in a different region."""
    edge = np.zeros(labels.shape, dtype=bool)
    dx = labels[:, 1:] != labels[:, :-1]
    dy = labels[1:, :] != labels[:-1, :]
    edge[:, 1:] |= dx
    edge[:, :-1] |= dx
    edge[1:, :] |= dy
    edge[:-1, :] |= dy
    return edge


def _region_fill(spmap: SuperpixelMap, values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    peak = v.max() if v.size else 0.0
    shade = np.full(v.size, UNIFORM_SHADE) if peak <= 0 else v / peak
    gray = shade[spmap.labels]
    return np.repeat(gray[:, :, None], 3, axis=2)


def kept_mask(grid: TokenGrid, kept_indices) -> np.ndarray:
    keep = np.zeros(grid.total_tokens, dtype=bool)
    keep[list(kept_indices)] = True
    return keep[grid.token_map()]


def overlay(image: ImageBuffer, spmap: SuperpixelMap, result: PruneResult, grid: TokenGrid, kind: str) -> np.ndarray:
    """Overlay as an ``(h, w, 3)`` uint8 array."""
    if (image.height, image.width) != (spmap.height, spmap.width):
        raise ValueError("image and segmentation sizes differ")
    if kind == "segments":
        rgb = _rgb(image)
        rgb[boundary_mask(spmap.labels)] = (1.0, 0.0, 0.0)
    elif kind == "density":
        rgb = _region_fill(spmap, result.densities)
    elif kind == "weights":
        rgb = _region_fill(spmap, result.weights)
    elif kind == "kept_tokens":
        if (grid.image_height, grid.image_width) != (image.height, image.width):
            raise ValueError("grid does not match image size")
        mask = kept_mask(grid, result.kept_indices)
        base = to_bytes8(_rgb(image))
        dark = to_bytes8(_rgb(image) * DROPPED_SHADE)
        return np.where(mask[:, :, None], base, dark)
    else:
        raise ValueError(f"unknown overlay kind {kind!r}; expected one of {OVERLAY_KINDS}")
    return to_bytes8(rgb)


def render_overlay(image, spmap, result, grid, kind, path) -> None:
    write_ppm(path, overlay(image, spmap, result, grid, kind))


def render_report(image, spmap, result, grid, path, title=None) -> None:
    """Five overlay panels plus a per-region budget chart, saved via matplotlib."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    panels = [("input", to_bytes8(_rgb(image)))]
    panels += [(kind.replace("_", " "), overlay(image, spmap, result, grid, kind)) for kind in OVERLAY_KINDS]

    fig, axes = plt.subplots(2, 3, figsize=(12, 8))
    for ax, (name, arr) in zip(axes.flat, panels):
        ax.imshow(arr, interpolation="nearest")
        ax.set_title(name)
        ax.set_xticks([])
        ax.set_yticks([])

    ax = axes.flat[-1]
    regions = np.arange(result.region_count)
    ax.bar(regions - 0.2, result.allocations, width=0.4, label="target $T_k$")
    ax.bar(regions + 0.2, result.kept_per_region, width=0.4, label="kept")
    ax.set_xlabel("region")
    ax.set_ylabel("tokens")
    ax.set_xticks(regions)
    ax.legend(frameon=False)
    ax.set_title(f"{len(result.kept_indices)}/{result.total_tokens} tokens kept")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    # no Software/date metadata, so reruns write identical bytes
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
