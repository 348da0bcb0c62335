"""Region information density, softmax-style weights and token budgeting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .model import BUDGET_POLICIES, ImageBuffer, SuperpixelMap, budget_for
from .superpixel import rgb_to_lab


@dataclass(frozen=True)
class RegionStats:
    pixel_count: int
    variance: float
    density: float


def _channel_values(image: ImageBuffer, space: str) -> np.ndarray:
    if space == "rgb":
        return image.data
    if space == "lab":
        if image.channels == 1:
            return image.data * 100.0
        return rgb_to_lab(image)
    raise ValueError(f"unknown variance space {space!r}")


def region_variance(image: ImageBuffer, spmap: SuperpixelMap, region_id: int, space: str = "rgb") -> float:
    """Population variance of the region's pixels, averaged over channels."""
    if not 0 <= region_id < spmap.region_count:
        raise ValueError(f"unknown region id {region_id}")
    if (image.height, image.width) != (spmap.height, spmap.width):
        raise ValueError("image and segmentation sizes differ")
    pixels = _channel_values(image, space)[spmap.labels == region_id]
    return float(pixels.var(axis=0).mean())


def region_variances(image: ImageBuffer, spmap: SuperpixelMap, space: str = "rgb") -> np.ndarray:
    """Vectorised :func:`region_variance` for every region at once."""
    if (image.height, image.width) != (spmap.height, spmap.width):
        raise ValueError("image and segmentation sizes differ")
    values = _channel_values(image, space)
    flat = spmap.labels.ravel()
    k = spmap.region_count
    return grouped_variance(values.reshape(-1, values.shape[2]), flat, k)


def grouped_variance(values: np.ndarray, groups: np.ndarray, n_groups: int) -> np.ndarray:
    """Channel-averaged population variance of ``values`` rows per group.

    Each group is shifted by its first member before the two-pass mean and
    centred sum of squares, so constant groups come out exactly zero.
    """
    counts = np.bincount(groups, minlength=n_groups).astype(np.float64)
    uniq, first = np.unique(groups, return_index=True)
    ref = np.zeros((n_groups, values.shape[1]))
    ref[uniq] = values[first]
    total = np.zeros(n_groups)
    for c in range(values.shape[1]):
        v = values[:, c] - ref[groups, c]
        mean = np.bincount(groups, v, n_groups) / counts
        total += np.bincount(groups, (v - mean[groups]) ** 2, n_groups) / counts
    return total / values.shape[1]


def information_density(variances: Sequence[float], pixel_counts: Sequence[int], total_pixels: int) -> np.ndarray:
    """``d_k = Var_k * sqrt(|P_k| / |P_total|)``."""
    if total_pixels <= 0:
        raise ValueError("total_pixels must be positive")
    var = np.asarray(variances, dtype=np.float64)
    area = np.asarray(pixel_counts, dtype=np.float64)
    return var * np.sqrt(area / total_pixels)


def region_stats(image: ImageBuffer, spmap: SuperpixelMap, space: str = "rgb") -> List[RegionStats]:
    counts = spmap.pixel_counts()
    var = region_variances(image, spmap, space)
    dens = information_density(var, counts, int(counts.sum()))
    return [RegionStats(int(n), float(v), float(d)) for n, v, d in zip(counts, var, dens)]


def allocation_weights(densities: Sequence[float], alpha: float = 1.5) -> np.ndarray:
    """Softmax of ``d_k / (alpha * max(d))``; uniform when every density is zero."""
    if not alpha > 1.0:
        raise ValueError("alpha must be > 1")
    d = np.asarray(densities, dtype=np.float64)
    if d.size == 0:
        raise ValueError("need at least one region")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValueError("densities must be finite and >= 0")
    peak = d.max()
    if peak == 0.0:
        return np.full(d.size, 1.0 / d.size)
    # ratio first so power-of-two rescaling of d is bit-exact
    e = np.exp((d / peak) / alpha)
    return e / e.sum()


def allocation_targets(weights: Sequence[float], keep_ratio: float, v_total: int) -> np.ndarray:
    """Fractional per-region budgets ``T_k = w_k * r * V_total``."""
    return np.asarray(weights, dtype=np.float64) * (keep_ratio * v_total)


def apportion(quotas: Sequence[float], budget: int, caps: Sequence[int]) -> List[int]:
    """Largest-remainder apportionment with per-region caps.

    Hands out ``min(budget, sum(caps))`` seats one at a time to the region
    with the largest unmet quota ``q_k - a_k`` (ties to the lower index),
    skipping capped regions. Without caps this is Hamilton's method; with
    caps the overflow falls to the next-largest remainders. When the budget
    covers every non-empty region, each starts with one seat.
    """
    q = np.asarray(quotas, dtype=np.float64)
    cap = np.asarray(caps, dtype=np.int64)
    if q.shape != cap.shape:
        raise ValueError("quotas and caps must have the same length")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    nonempty = cap > 0
    alloc = np.zeros(q.size, dtype=np.int64)
    if budget >= nonempty.sum():
        alloc[nonempty] = 1
    target = min(budget, int(cap.sum()))
    for _ in range(target - int(alloc.sum())):
        gap = np.where(alloc < cap, q - alloc, -np.inf)
        alloc[int(np.argmax(gap))] += 1
    return alloc.tolist()


def allocate_budget(
    weights: Sequence[float],
    keep_ratio: float,
    v_total: int,
    omega_sizes: Sequence[int],
    policy: str = "exact_budget",
) -> List[int]:
    """Integer tokens kept per region under ``policy``.

    ``paper_ceiling`` keeps ``min(ceil(T_k), |omega_k|)``, which may exceed
    the budget by up to K-1. ``exact_budget`` apportions exactly
    ``floor(r * V_total)`` tokens.
    """
    if policy not in BUDGET_POLICIES:
        raise ValueError(f"unknown budget policy {policy!r}")
    if not 0.0 < keep_ratio <= 1.0:
        raise ValueError("keep_ratio must be in (0, 1]")
    w = np.asarray(weights, dtype=np.float64)
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    sizes = list(omega_sizes)
    if policy == "paper_ceiling":
        targets = allocation_targets(w, keep_ratio, v_total)
        return [min(n, math.ceil(t - 1e-9)) for t, n in zip(targets, sizes)]
    budget = budget_for(keep_ratio, v_total)
    return apportion(w * budget, budget, sizes)
