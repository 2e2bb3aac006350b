"""Low-dimensional observable mapping an image to 22 features per channel.

Per-channel layout, concatenated in channel order:

    [mean, std, 16 grid-cell means (4x4 grid, row-major), 4 orthonormal
     DCT-II coefficients at (0,0), (0,1), (1,0), (1,1)]

The standard deviation is the population form (divide by N). Grid bands are
contiguous and nearly equal, with the larger bands first when the extent is
not divisible by 4. Features are computed on raw iterates; instability shows
up precisely in out-of-range excursions, so nothing is clamped.
"""

from __future__ import annotations

import math

import numpy as np

from .image import Image

__all__ = [
    "FEATURES_PER_CHANNEL",
    "channel_stats",
    "dct_lowfreq",
    "extract_features",
    "grid_pool_means",
]

FEATURES_PER_CHANNEL = 22


def channel_stats(plane: np.ndarray) -> tuple[float, float]:
    """(mean, population standard deviation) of one channel plane."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.size == 0:
        raise ValueError("channel plane is empty")
    return float(plane.mean()), float(plane.std())


def _band_edges(n: int) -> np.ndarray:
    # 4 contiguous bands of sizes ceil(n/4) or floor(n/4), larger bands first
    q, rem = divmod(n, 4)
    sizes = [q + 1] * rem + [q] * (4 - rem)
    return np.cumsum([0] + sizes)


def grid_pool_means(plane: np.ndarray) -> np.ndarray:
    """Means of the 16 cells of a non-overlapping 4x4 grid, row-major."""
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    if h < 4 or w < 4:
        raise ValueError(f"grid pooling needs at least 4x4 pixels, got {h}x{w}")
    re = _band_edges(h)
    ce = _band_edges(w)
    out = np.empty(16)
    for i in range(4):
        for j in range(4):
            out[4 * i + j] = plane[re[i]:re[i + 1], ce[j]:ce[j + 1]].mean()
    return out


def _dct_basis(n: int) -> np.ndarray:
    """First two rows of the orthonormal DCT-II basis of length n."""
    i = np.arange(n)
    b = np.empty((2, n))
    b[0] = math.sqrt(1.0 / n)
    b[1] = math.sqrt(2.0 / n) * np.cos(math.pi * (2 * i + 1) / (2 * n))
    return b


def dct_lowfreq(plane: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D DCT-II coefficients (0,0), (0,1), (1,0), (1,1)."""
    plane = np.asarray(plane, dtype=np.float64)
    h, w = plane.shape
    if h < 2 or w < 2:
        raise ValueError(f"DCT block needs at least 2x2 pixels, got {h}x{w}")
    block = _dct_basis(h) @ plane @ _dct_basis(w).T
    return block.reshape(4)


def extract_features(x: Image) -> np.ndarray:
    """Concatenated per-channel descriptor, length 22 * C."""
    c = x.channels
    out = np.empty(FEATURES_PER_CHANNEL * c)
    for k in range(c):
        plane = x.data[k]
        mean, std = channel_stats(plane)
        base = FEATURES_PER_CHANNEL * k
        out[base] = mean
        out[base + 1] = std
        out[base + 2: base + 18] = grid_pool_means(plane)
        out[base + 18: base + 22] = dct_lowfreq(plane)
    return out
