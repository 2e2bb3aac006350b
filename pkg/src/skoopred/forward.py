"""Linear measurement operators with exact adjoints, and measurement simulation.

All convolutions are circular (periodic boundary), which makes the adjoint
of blurring exactly the correlation with the same kernel. Superresolution is
blur followed by decimation at phase 0; its adjoint is zero-insertion
upsampling followed by correlation.

Kernel text format: lines starting with '#' are comments; the first data
line is "H W" (two integers), followed by H lines of W whitespace-separated
floats, row-major. Blur kernels are normalized to unit sum on load unless
normalization is disabled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .image import Image, ShapeMismatchError

__all__ = [
    "Deblur",
    "ForwardModel",
    "Kernel",
    "Measurement",
    "Superresolve",
    "apply_adjoint",
    "apply_forward",
    "bicubic_upsample",
    "box_kernel",
    "convolve_circular",
    "correlate_circular",
    "data_gradient",
    "estimate_gradient_lipschitz",
    "format_kernel",
    "gaussian_kernel",
    "identity_kernel",
    "load_kernel",
    "parse_kernel",
    "simulate_measurement",
]


@dataclass(frozen=True, eq=False)
class Kernel:
    """2-D convolution kernel; ``normalized`` asserts unit tap sum."""

    taps: np.ndarray
    normalized: bool = False
    _transfers: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64, order="C")
        if taps.ndim != 2 or min(taps.shape) < 1:
            raise ValueError(f"kernel taps must be 2-D, got shape {taps.shape}")
        if not np.isfinite(taps).all():
            raise ValueError("kernel taps must be finite")
        if self.normalized and abs(taps.sum() - 1.0) > 1e-12:
            raise ValueError(
                f"normalized kernel must sum to 1 within 1e-12, got {taps.sum()!r}"
            )
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def height(self) -> int:
        return self.taps.shape[0]

    @property
    def width(self) -> int:
        return self.taps.shape[1]

    def transfer(self, hw: tuple[int, int], fold: bool = False) -> np.ndarray:
        """rfft2 of the kernel embedded at image size, center tap at origin.

        With ``fold`` an oversized kernel wraps modulo the image extents
        (exact circular-convolution semantics); without it that is an error.
        """
        key = (hw, fold)
        t = self._transfers.get(key)
        if t is None:
            t = np.fft.rfft2(_embed(self.taps, hw, fold))
            t.setflags(write=False)
            self._transfers[key] = t
        return t


def _embed(taps: np.ndarray, hw: tuple[int, int], fold: bool = False) -> np.ndarray:
    h, w = hw
    kh, kw = taps.shape
    if kh > h or kw > w:
        if not fold:
            raise ValueError(f"kernel {kh}x{kw} larger than image {h}x{w}")
        out = np.zeros((h, w))
        rows = (np.arange(kh) - kh // 2)[:, None] % h
        cols = (np.arange(kw) - kw // 2)[None, :] % w
        np.add.at(out, (np.broadcast_to(rows, (kh, kw)), np.broadcast_to(cols, (kh, kw))), taps)
        return out
    out = np.zeros((h, w))
    out[:kh, :kw] = taps
    return np.roll(out, (-(kh // 2), -(kw // 2)), axis=(0, 1))


def gaussian_kernel(size: int, sigma: float) -> Kernel:
    """size x size sampled Gaussian, normalized to unit sum."""
    if size < 1:
        raise ValueError(f"kernel size must be >= 1, got {size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    off = np.arange(size) - (size - 1) / 2.0
    g1 = np.exp(-(off**2) / (2.0 * sigma * sigma))
    taps = np.outer(g1, g1)
    return Kernel(taps / taps.sum(), normalized=True)


def identity_kernel() -> Kernel:
    return Kernel(np.ones((1, 1)), normalized=True)


def box_kernel(radius: int) -> Kernel:
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    n = 2 * radius + 1
    return Kernel(np.full((n, n), 1.0 / (n * n)), normalized=True)


def parse_kernel(text: str, normalize: bool = True) -> Kernel:
    rows = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ValueError("kernel text is empty")
    head = rows[0].split()
    if len(head) != 2:
        raise ValueError(f"kernel header must be 'H W', got {rows[0]!r}")
    try:
        h, w = int(head[0]), int(head[1])
    except ValueError as e:
        raise ValueError(f"kernel header must be two integers, got {rows[0]!r}") from e
    if h < 1 or w < 1:
        raise ValueError(f"kernel extents must be positive, got {h}x{w}")
    if len(rows) - 1 != h:
        raise ValueError(f"kernel body has {len(rows) - 1} rows, header says {h}")
    taps = np.empty((h, w))
    for i, ln in enumerate(rows[1:]):
        vals = ln.split()
        if len(vals) != w:
            raise ValueError(f"kernel row {i} has {len(vals)} values, header says {w}")
        taps[i] = [float(v) for v in vals]
    if normalize:
        s = taps.sum()
        if s == 0:
            raise ValueError("cannot normalize a zero-sum kernel")
        return Kernel(taps / s, normalized=True)
    return Kernel(taps)


def format_kernel(k: Kernel) -> str:
    lines = [f"{k.height} {k.width}"]
    for row in k.taps:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def load_kernel(path, normalize: bool = True) -> Kernel:
    with open(path, "r", encoding="utf-8") as f:
        return parse_kernel(f.read(), normalize=normalize)


def convolve_circular(x: Image, k: Kernel) -> Image:
    """Per-channel 2-D circular convolution, kernel anchored at its center tap."""
    h, w = x.height, x.width
    t = k.transfer((h, w))
    out = np.fft.irfft2(np.fft.rfft2(x.data) * t, s=(h, w))
    return Image._wrap(out)


def correlate_circular(x: Image, k: Kernel) -> Image:
    """Adjoint of :func:`convolve_circular` with the same kernel."""
    h, w = x.height, x.width
    t = k.transfer((h, w))
    out = np.fft.irfft2(np.fft.rfft2(x.data) * np.conj(t), s=(h, w))
    return Image._wrap(out)


def convolve_circular_folded(x: Image, k: Kernel) -> Image:
    """Circular convolution that wraps oversized kernels instead of erroring.

    Used by the smoothing denoisers, whose truncation radius can exceed a
    small image; folding the taps is the exact periodic-convolution result.
    """
    h, w = x.height, x.width
    t = k.transfer((h, w), fold=True)
    out = np.fft.irfft2(np.fft.rfft2(x.data) * t, s=(h, w))
    return Image._wrap(out)


class ForwardModel:
    """Linear operator A with an exact adjoint under the Euclidean inner product."""

    def apply(self, x: Image) -> Image:
        raise NotImplementedError

    def adjoint(self, y: Image) -> Image:
        raise NotImplementedError

    def output_shape(self, shape: tuple[int, int, int]) -> tuple[int, int, int]:
        raise NotImplementedError

    def label(self) -> str:
        raise NotImplementedError


class Deblur(ForwardModel):
    """A = circular blur with a fixed kernel; self-shaped."""

    def __init__(self, kernel: Kernel):
        self.kernel = kernel

    def apply(self, x: Image) -> Image:
        return convolve_circular(x, self.kernel)

    def adjoint(self, y: Image) -> Image:
        return correlate_circular(y, self.kernel)

    def output_shape(self, shape):
        return tuple(shape)

    def label(self) -> str:
        return f"deblur[{self.kernel.height}x{self.kernel.width}]"


class Superresolve(ForwardModel):
    """A = circular blur then keep every s-th row/column starting at index 0."""

    def __init__(self, kernel: Kernel, factor: int):
        if factor < 2:
            raise ValueError(f"superresolution factor must be >= 2, got {factor}")
        self.kernel = kernel
        self.factor = int(factor)

    def _check_domain(self, shape):
        c, h, w = shape
        if h % self.factor or w % self.factor:
            raise ShapeMismatchError(
                f"superresolve requires H and W divisible by {self.factor}",
                shape,
                (c, h - h % self.factor, w - w % self.factor),
            )

    def apply(self, x: Image) -> Image:
        self._check_domain(x.shape)
        blurred = convolve_circular(x, self.kernel)
        return Image._wrap(np.ascontiguousarray(blurred.data[:, :: self.factor, :: self.factor]))

    def adjoint(self, y: Image) -> Image:
        s = self.factor
        c, h, w = y.shape
        up = np.zeros((c, h * s, w * s))
        up[:, ::s, ::s] = y.data
        return correlate_circular(Image._wrap(up), self.kernel)

    def output_shape(self, shape):
        self._check_domain(shape)
        c, h, w = shape
        return (c, h // self.factor, w // self.factor)

    def label(self) -> str:
        return f"superresolve[{self.kernel.height}x{self.kernel.width},s={self.factor}]"


def apply_forward(m: ForwardModel, x: Image) -> Image:
    return m.apply(x)


def apply_adjoint(m: ForwardModel, y: Image) -> Image:
    return m.adjoint(y)


def data_gradient(m: ForwardModel, x: Image, b: Image) -> Image:
    """Gradient of 0.5 * ||Ax - b||^2, i.e. A^T(Ax - b)."""
    r = m.apply(x)
    if r.shape != b.shape:
        raise ShapeMismatchError("data_gradient measurement", r.shape, b.shape)
    return m.adjoint(Image._wrap(r.data - b.data))


@dataclass(frozen=True)
class Measurement:
    """Simulated observation b = Ax + noise."""

    b: Image
    noise_sigma: float
    seed: int


def simulate_measurement(m: ForwardModel, x_clean: Image, sigma_n: float, seed: int) -> Measurement:
    if sigma_n < 0:
        raise ValueError(f"noise sigma must be >= 0, got {sigma_n}")
    y = m.apply(x_clean)
    if sigma_n > 0:
        rng = np.random.default_rng(seed)
        y = Image._wrap(y.data + rng.normal(0.0, sigma_n, size=y.shape))
    return Measurement(b=y, noise_sigma=float(sigma_n), seed=int(seed))


def estimate_gradient_lipschitz(
    m: ForwardModel,
    shape: tuple[int, int, int] | tuple[int, int],
    iterations: int = 50,
    seed: int = 0,
) -> float:
    """Power-iteration estimate of lambda_max(A^T A).

    The Rayleigh quotient of a PSD operator is non-decreasing along power
    iterations, so this is a lower-bound-style estimate that improves with
    ``iterations``.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if len(shape) == 2:
        shape = (1, *shape)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(shape)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iterations):
        w = m.adjoint(m.apply(Image._wrap(v))).data
        est = float(np.vdot(v, w).real)
        n = np.linalg.norm(w)
        if n == 0.0:
            return 0.0
        v = w / n
    return est


def _catmull_rom_weights(f: np.ndarray) -> np.ndarray:
    """Weights on samples at offsets (-1, 0, 1, 2) for fractional position f."""
    f2 = f * f
    f3 = f2 * f
    return np.stack(
        [
            -0.5 * f3 + f2 - 0.5 * f,
            1.5 * f3 - 2.5 * f2 + 1.0,
            -1.5 * f3 + 2.0 * f2 + 0.5 * f,
            0.5 * f3 - 0.5 * f2,
        ],
        axis=1,
    )


def _upsample_matrix(n: int, s: int) -> np.ndarray:
    """(s*n) x n periodic Catmull-Rom interpolation matrix, phase-aligned so
    output index s*i lands exactly on input sample i."""
    u = np.arange(s * n)
    i0 = u // s
    f = (u - i0 * s) / s
    wts = _catmull_rom_weights(f)
    mat = np.zeros((s * n, n))
    for j, off in enumerate((-1, 0, 1, 2)):
        np.add.at(mat, (u, (i0 + off) % n), wts[:, j])
    return mat


def bicubic_upsample(y: Image, s: int) -> Image:
    """Catmull-Rom bicubic upsampling by integer factor s, periodic boundary."""
    if s < 2:
        raise ValueError(f"upsampling factor must be >= 2, got {s}")
    wr = _upsample_matrix(y.height, s)
    wc = _upsample_matrix(y.width, s)
    out = np.einsum("ij,cjk,lk->cil", wr, y.data, wc, optimize=True)
    return Image._wrap(out)
