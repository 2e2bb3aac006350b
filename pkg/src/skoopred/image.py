"""Planar image container and reconstruction-quality metrics.

Images are float64 arrays in (channel, row, column) order wrapped in an
immutable value type. Intensities are nominally in [0, 1] but are never
clamped here: solver iterates may legitimately leave the range, and only
file output quantizes. All metric functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Image",
    "Metrics",
    "NonFiniteImageError",
    "PSNR_EXACT_DB",
    "ShapeMismatchError",
    "l2_distance",
    "mse",
    "psnr",
]

# Written to CSV in place of the infinite PSNR of an exact match.
PSNR_EXACT_DB = 99.0


class ShapeMismatchError(ValueError):
    """Two images (or an image and an operator) disagree on shape."""

    def __init__(self, what: str, a, b):
        super().__init__(f"{what}: shapes {tuple(a)} and {tuple(b)} differ")
        self.shapes = (tuple(a), tuple(b))


class NonFiniteImageError(ValueError):
    """Image data contains NaN or Inf at construction time."""


class Image:
    """Immutable multi-channel raster; ``data`` has shape (C, H, W), float64.

    The public constructor copies its input and rejects non-finite samples.
    Operations that can produce non-finite values (the solver iteration)
    bypass the check via :meth:`_wrap` and report divergence themselves.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order="C")
        if arr.ndim == 2:
            arr = arr[np.newaxis, :, :]
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(
                f"image data must have shape (C, H, W) or (H, W), got {arr.shape}"
            )
        if not np.isfinite(arr).all():
            raise NonFiniteImageError("image contains NaN or Inf samples")
        arr.setflags(write=False)
        self.data = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "Image":
        """Adopt a freshly computed array without copying or finiteness checks."""
        if arr.ndim == 2:
            arr = arr[np.newaxis, :, :]
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        arr.setflags(write=False)
        img = cls.__new__(cls)
        img.data = arr
        return img

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def n_samples(self) -> int:
        return self.data.size

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())

    def norm(self) -> float:
        """Euclidean norm of the flattened sample vector."""
        return float(np.linalg.norm(self.data))

    def __add__(self, other: "Image") -> "Image":
        _require_same_shape(self, other, "image add")
        return Image._wrap(self.data + other.data)

    def __sub__(self, other: "Image") -> "Image":
        _require_same_shape(self, other, "image subtract")
        return Image._wrap(self.data - other.data)

    def __mul__(self, a: float) -> "Image":
        return Image._wrap(self.data * float(a))

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"Image({self.channels}x{self.height}x{self.width})"


def _require_same_shape(a: Image, b: Image, what: str) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError(what, a.data.shape, b.data.shape)


def mse(a: Image, b: Image) -> float:
    """Mean squared error over all C*H*W samples."""
    _require_same_shape(a, b, "mse")
    d = a.data - b.data
    return float(np.mean(d * d))


def psnr(a: Image, ref: Image, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` on an exact match.

    The infinity return is the API-level "exact" flag; CSV writers emit
    ``PSNR_EXACT_DB`` in its place to keep the column numeric.
    """
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    m = mse(a, ref)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / m)


def l2_distance(a: Image, b: Image) -> float:
    """Euclidean norm of the flattened difference."""
    _require_same_shape(a, b, "l2_distance")
    return float(np.linalg.norm(a.data - b.data))


@dataclass(frozen=True)
class Metrics:
    """Per-iterate quality numbers logged by the solver."""

    psnr_db: float | None
    residual_norm: float
    mse: float
