"""SLIC superpixel segmentation, written against plain numpy.

Pipeline: Gaussian smoothing, conversion to a perceptual feature space
(CIELAB for colour, intensity x100 for grayscale), grid seeding with
gradient perturbation, windowed k-means with the joint colour/spatial
distance, and a final connectivity pass.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from .model import ImageBuffer, SuperpixelMap, SuperpixelParams

# D65 reference white, CIE 1931 2-degree observer
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_CONVERGENCE_PX = 0.25


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _convolve_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = kernel.size // 2
    pad = [(0, 0)] * arr.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(arr, pad, mode="edge")
    n = arr.shape[axis]
    out = np.zeros_like(arr)
    for i, weight in enumerate(kernel):
        out += weight * np.take(padded, np.arange(i, i + n), axis=axis)
    return out


def gaussian_smooth(image: ImageBuffer, sigma: float) -> ImageBuffer:
    """Separable Gaussian blur per channel with clamp-to-edge borders.

    The kernel radius is ``ceil(3 * sigma)``; ``sigma == 0`` is the identity.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return image
    kernel = gaussian_kernel(sigma)
    out = _convolve_axis(image.data, kernel, axis=0)
    out = _convolve_axis(out, kernel, axis=1)
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def _srgb_to_lab_array(rgb: np.ndarray) -> np.ndarray:
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _SRGB_TO_XYZ.T / _WHITE_D65
    eps = 216.0 / 24389.0
    kappa = 24389.0 / 27.0
    f = np.where(xyz > eps, np.cbrt(xyz), (kappa * xyz + 16.0) / 116.0)
    L = 116.0 * f[..., 1] - 16.0
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def rgb_to_lab(image: ImageBuffer) -> np.ndarray:
    """Convert an sRGB image to CIELAB (D65).

    Returns an ``(height, width, 3)`` float array rather than an
    ``ImageBuffer``, since Lab values fall outside [0, 1].
    """
    if image.channels != 3:
        raise ValueError("rgb_to_lab requires a 3-channel image; use the grayscale path")
    return _srgb_to_lab_array(image.data)


def feature_image(image: ImageBuffer, sigma: float) -> np.ndarray:
    """Smoothed image in the space SLIC clusters in."""
    smoothed = gaussian_smooth(image, sigma)
    if smoothed.channels == 3:
        return rgb_to_lab(smoothed)
    return smoothed.data * 100.0


def _gradient_magnitude(features: np.ndarray) -> np.ndarray:
    padded = np.pad(features, ((1, 1), (1, 1), (0, 0)), mode="edge")
    dx = padded[1:-1, 2:] - padded[1:-1, :-2]
    dy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    return (dx**2).sum(axis=-1) + (dy**2).sum(axis=-1)


def seed_grid(height: int, width: int, n: int):
    """Grid shape ``(rows, cols)`` whose product approximates ``n``."""
    rows = min(height, max(1, int(round(math.sqrt(n * height / width)))))
    cols = min(width, max(1, int(round(n / rows))))
    return rows, cols


class ClusterState(NamedTuple):
    labels: np.ndarray
    centers_yx: np.ndarray
    step: float
    iterations: int


def slic_cluster(features: np.ndarray, params: SuperpixelParams) -> ClusterState:
    """Windowed k-means step of SLIC, before connectivity enforcement.

    ``centers_yx`` are the centres used by the final assignment sweep.
    """
    h, w, _ = features.shape
    n = params.num_superpixels
    step = math.sqrt(h * w / n)
    rows, cols = seed_grid(h, w, n)

    grad = _gradient_magnitude(features)
    seeds = []
    for i in range(rows):
        for j in range(cols):
            y = int((i + 0.5) * h / rows)
            x = int((j + 0.5) * w / cols)
            y0, y1 = max(0, y - 1), min(h, y + 2)
            x0, x1 = max(0, x - 1), min(w, x + 2)
            dy, dx = np.unravel_index(np.argmin(grad[y0:y1, x0:x1]), (y1 - y0, x1 - x0))
            seeds.append((y0 + dy, x0 + dx))
    centers_yx = np.array(seeds, dtype=np.float64)
    centers_col = np.array([features[y, x] for y, x in seeds], dtype=np.float64)

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    labels = (
        np.minimum(np.arange(h) * rows // h, rows - 1)[:, None] * cols
        + np.minimum(np.arange(w) * cols // w, cols - 1)[None, :]
    )
    spatial_scale = (params.compactness / step) ** 2
    k_count = len(seeds)
    iterations = 0

    for _ in range(params.max_iterations):
        iterations += 1
        used = centers_yx.copy()
        dist = np.full((h, w), np.inf)
        for k in range(k_count):
            cy, cx = centers_yx[k]
            y0, y1 = max(0, int(math.floor(cy - step))), min(h, int(math.floor(cy + step)) + 1)
            x0, x1 = max(0, int(math.floor(cx - step))), min(w, int(math.floor(cx + step)) + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            dc = ((features[y0:y1, x0:x1] - centers_col[k]) ** 2).sum(axis=-1)
            ds = (yy[y0:y1, x0:x1] - cy) ** 2 + (xx[y0:y1, x0:x1] - cx) ** 2
            d = dc + ds * spatial_scale
            window = dist[y0:y1, x0:x1]
            closer = d < window
            window[closer] = d[closer]
            labels[y0:y1, x0:x1][closer] = k

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=k_count).astype(np.float64)
        occupied = counts > 0
        new_yx = centers_yx.copy()
        new_yx[occupied, 0] = np.bincount(flat, yy.ravel(), k_count)[occupied] / counts[occupied]
        new_yx[occupied, 1] = np.bincount(flat, xx.ravel(), k_count)[occupied] / counts[occupied]
        for c in range(features.shape[2]):
            sums = np.bincount(flat, features[..., c].ravel(), k_count)
            centers_col[occupied, c] = sums[occupied] / counts[occupied]
        movement = np.sqrt(((new_yx - centers_yx) ** 2).sum(axis=1)).max()
        centers_yx = new_yx
        if movement < _CONVERGENCE_PX:
            break

    return ClusterState(labels, used, step, iterations)


def _raster_relabel(labels: np.ndarray) -> np.ndarray:
    """Renumber labels 0..K-1 in order of first appearance in raster scan."""
    uniq, first = np.unique(labels.ravel(), return_index=True)
    order = uniq[np.argsort(first)]
    lut = np.empty(labels.max() + 1, dtype=np.int64)
    lut[order] = np.arange(order.size)
    return lut[labels]


def connected_components(labels: np.ndarray) -> np.ndarray:
    """Split every label into its 4-connected components, raster-numbered."""
    comp = np.zeros(labels.shape, dtype=np.int64)
    offset = 0
    for lab in np.unique(labels):
        cl, n = ndimage.label(labels == lab)
        mask = cl > 0
        comp[mask] = cl[mask] + offset
        offset += n
    return _raster_relabel(comp)


def _adjacent_pairs(comp: np.ndarray) -> np.ndarray:
    pairs = []
    for a, b in ((comp[:, :-1], comp[:, 1:]), (comp[:-1, :], comp[1:, :])):
        diff = a != b
        pairs.append(np.column_stack([a[diff], b[diff]]))
    p = np.concatenate(pairs)
    p = np.sort(p, axis=1)
    return np.unique(p, axis=0) if p.size else p.reshape(0, 2)


def enforce_connectivity(labels: np.ndarray, min_size: float) -> np.ndarray:
    """Merge components smaller than ``min_size`` into their largest neighbour.

    Components are visited smallest first (ties in raster order). Each
    returned region is a single 4-connected component, labelled in raster
    order of first appearance.
    """
    comp = connected_components(labels)
    n = int(comp.max()) + 1
    size = np.bincount(comp.ravel(), minlength=n).tolist()
    adj = [set() for _ in range(n)]
    for a, b in _adjacent_pairs(comp).tolist():
        adj[a].add(b)
        adj[b].add(a)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for c in sorted(range(n), key=lambda i: (size[i], i)):
        g = find(c)
        if size[g] >= min_size:
            continue
        neighbours = {find(x) for x in adj[g]} - {g}
        if not neighbours:
            continue
        # component ids are raster-ordered, so -id prefers the earliest on ties
        target = max(neighbours, key=lambda r: (size[r], -r))
        parent[g] = target
        size[target] += size[g]
        adj[target] = {find(x) for x in adj[target] | adj[g]} - {target}

    roots = np.array([find(i) for i in range(n)], dtype=np.int64)
    return _raster_relabel(roots[comp])


def slic_segment(image: ImageBuffer, params: SuperpixelParams) -> SuperpixelMap:
    """Segment ``image`` into superpixels.

    The returned region count may differ from ``params.num_superpixels``
    after connectivity enforcement. Output is fully deterministic.
    """
    if image.width < 2 or image.height < 2:
        raise ValueError("image too small to segment")
    params.check_image(image.width, image.height)
    features = feature_image(image, params.sigma)
    state = slic_cluster(features, params)
    min_size = (image.width * image.height / params.num_superpixels) / 4.0
    labels = enforce_connectivity(state.labels, min_size)
    return SuperpixelMap(labels, int(labels.max()) + 1)
