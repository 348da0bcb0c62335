"""Token selection: per-region top-k by importance, plus the baseline modes."""

from __future__ import annotations

from typing import NamedTuple, Optional, Sequence

import numpy as np

from .ddc import assign_tokens_to_regions
from .ddf import (
    allocate_budget,
    allocation_targets,
    allocation_weights,
    grouped_variance,
    region_stats,
)
from .model import (
    ImageBuffer,
    ImportanceMap,
    PruneConfig,
    PruneResult,
    RegionTokenAssignment,
    SuperpixelMap,
    TokenGrid,
    budget_for,
)
from .superpixel import slic_segment


def importance_from_variance(image: ImageBuffer, grid: TokenGrid) -> ImportanceMap:
    """Per-token population variance of its patch pixels (channel-averaged)."""
    _check_grid(image, grid)
    values = image.data.reshape(-1, image.channels)
    var = grouped_variance(values, grid.token_map().ravel(), grid.total_tokens)
    return ImportanceMap(var, "variance_proxy")


def _ranked(indices: Sequence[int], importance: ImportanceMap) -> list:
    """Token indices by descending importance, ascending index on ties."""
    values = importance.values
    return sorted(indices, key=lambda t: (-values[t], t))


def select_in_region(omega_k: Sequence[int], importance: ImportanceMap, keep_k: int) -> list:
    if keep_k < 0 or keep_k > len(omega_k):
        raise ValueError(f"cannot keep {keep_k} of {len(omega_k)} tokens")
    return sorted(_ranked(omega_k, importance)[:keep_k])


def global_topk(importance: ImportanceMap, keep: int) -> list:
    return sorted(_ranked(range(len(importance)), importance)[:keep])


def _check_grid(image: ImageBuffer, grid: TokenGrid) -> None:
    if (image.height, image.width) != (grid.image_height, grid.image_width):
        raise ValueError(
            f"grid was built for {grid.image_height}x{grid.image_width}, "
            f"image is {image.height}x{image.width}"
        )


class PruneTrace(NamedTuple):
    """A prune result together with the intermediates that produced it."""

    result: PruneResult
    segmentation: SuperpixelMap
    assignment: RegionTokenAssignment
    importance: ImportanceMap


def prune_traced(
    image: ImageBuffer,
    grid: TokenGrid,
    importance: Optional[ImportanceMap],
    config: PruneConfig,
    segmentation: Optional[SuperpixelMap] = None,
    variance_space: str = "rgb",
) -> PruneTrace:
    _check_grid(image, grid)
    v_total = grid.total_tokens
    if importance is None:
        importance = importance_from_variance(image, grid)
    if len(importance) != v_total:
        raise ValueError(f"importance has {len(importance)} values, grid has {v_total} tokens")
    if segmentation is None:
        segmentation = slic_segment(image, config.superpixel)
    assignment = assign_tokens_to_regions(segmentation, grid)
    sizes = assignment.sizes()
    r = config.keep_ratio

    densities = np.array([s.density for s in region_stats(image, segmentation, variance_space)])
    budget = budget_for(r, v_total)

    if config.mode == "global_topk":
        kept = global_topk(importance, budget)
        per_region = np.bincount(
            np.asarray(assignment.token_to_region)[kept], minlength=assignment.region_count
        ).astype(int)
        # realised distribution, since no per-region budget exists in this mode
        weights = per_region / max(len(kept), 1)
        targets = per_region.astype(float)
    else:
        if config.mode == "altp":
            weights = allocation_weights(densities, config.alpha)
        else:
            # uniform r_k = r: T_k = r * |omega_k|
            weights = np.asarray(sizes, dtype=np.float64) / v_total
        targets = allocation_targets(weights, r, v_total)
        per_region = allocate_budget(weights, r, v_total, sizes, config.budget_policy)
        kept = []
        for omega_k, keep_k in zip(assignment.omega, per_region):
            kept.extend(select_in_region(omega_k, importance, keep_k))
        kept.sort()

    result = PruneResult(
        kept_indices=tuple(kept),
        densities=tuple(densities.tolist()),
        weights=tuple(np.asarray(weights, dtype=float).tolist()),
        allocations=tuple(np.asarray(targets, dtype=float).tolist()),
        kept_per_region=tuple(int(v) for v in per_region),
        total_tokens=v_total,
        budget=budget,
    )
    return PruneTrace(result, segmentation, assignment, importance)


def prune(
    image: ImageBuffer,
    grid: TokenGrid,
    importance: Optional[ImportanceMap],
    config: PruneConfig,
) -> PruneResult:
    """Run the full pruning pipeline and return the kept token set.

    ``importance=None`` falls back to the patch-variance proxy. ``altp``
    weights regions by information density, ``ddc_uniform`` keeps the same
    fraction of every region, and ``global_topk`` ignores regions entirely.
    """
    return prune_traced(image, grid, importance, config).result
