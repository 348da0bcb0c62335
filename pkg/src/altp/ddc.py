"""Binding superpixels to the visual-token grid, and uniform per-region retention."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .model import RegionTokenAssignment, SuperpixelMap, TokenGrid


def build_token_grid(image_width: int, image_height: int, grid_rows: int, grid_cols: int) -> TokenGrid:
    """Patch grid with ``ceil``-sized patches; the last row/column may be clipped.

    >>> build_token_grid(336, 336, 24, 24).total_tokens
    576
    """
    if grid_rows < 1 or grid_cols < 1:
        raise ValueError("grid dimensions must be >= 1")
    if grid_rows > image_height or grid_cols > image_width:
        raise ValueError(
            f"grid {grid_rows}x{grid_cols} is larger than image {image_height}x{image_width}"
        )
    return TokenGrid(
        grid_rows=grid_rows,
        grid_cols=grid_cols,
        patch_height=math.ceil(image_height / grid_rows),
        patch_width=math.ceil(image_width / grid_cols),
        image_height=image_height,
        image_width=image_width,
    )


def assign_tokens_to_regions(spmap: SuperpixelMap, grid: TokenGrid) -> RegionTokenAssignment:
    """Give each token to the region owning most of its patch pixels.

    Ties go to the smaller region id. Regions that win no token keep an
    empty entry in ``omega``.
    """
    if (spmap.height, spmap.width) != (grid.image_height, grid.image_width):
        raise ValueError(
            f"segmentation is {spmap.height}x{spmap.width} but grid covers "
            f"{grid.image_height}x{grid.image_width}"
        )
    k = spmap.region_count
    tokens = grid.token_map().ravel()
    # joint histogram of (token, region) pixel counts
    hist = np.bincount(tokens * k + spmap.labels.ravel(), minlength=grid.total_tokens * k)
    owner = hist.reshape(grid.total_tokens, k).argmax(axis=1)
    omega = tuple(tuple(np.flatnonzero(owner == r).tolist()) for r in range(k))
    return RegionTokenAssignment(omega, tuple(owner.tolist()))


def ddc_keep_counts(assignment: RegionTokenAssignment, ratios: Sequence[float]) -> list:
    """``ceil(r_k * |omega_k|)`` tokens per region."""
    sizes = assignment.sizes()
    if len(ratios) != len(sizes):
        raise ValueError("need one keep ratio per region")
    counts = []
    for r, n in zip(ratios, sizes):
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"per-region keep ratio must be in [0, 1], got {r}")
        # tolerance keeps exact products such as 0.1 * 30 from ceiling upward
        keep = math.ceil(r * n - 1e-9)
        if r > 0:
            keep = max(keep, 1)
        counts.append(min(n, keep) if n else 0)
    return counts
