"""Superpixel-aware visual token pruning for vision-language models."""

__version__ = "0.1.0"

from .ddc import assign_tokens_to_regions, build_token_grid, ddc_keep_counts
from .ddf import allocate_budget, allocation_weights, information_density, region_variance
from .flops import FlopsConfig, layer_flops, remaining_ratio
from .model import (
    ImageBuffer,
    ImportanceMap,
    PruneConfig,
    PruneResult,
    RegionTokenAssignment,
    SuperpixelMap,
    SuperpixelParams,
    TokenGrid,
)
from .selector import importance_from_variance, prune, select_in_region
from .superpixel import gaussian_smooth, rgb_to_lab, slic_segment

__all__ = [
    "FlopsConfig",
    "ImageBuffer",
    "ImportanceMap",
    "PruneConfig",
    "PruneResult",
    "RegionTokenAssignment",
    "SuperpixelMap",
    "SuperpixelParams",
    "TokenGrid",
    "allocate_budget",
    "allocation_weights",
    "assign_tokens_to_regions",
    "build_token_grid",
    "ddc_keep_counts",
    "gaussian_smooth",
    "importance_from_variance",
    "information_density",
    "layer_flops",
    "prune",
    "region_variance",
    "remaining_ratio",
    "rgb_to_lab",
    "select_in_region",
    "slic_segment",
]
