"""Pluggable denoising operators, including a deliberately expansive one.

Built-ins are pure, deterministic, and shape-preserving. Smoothing variants
use circular boundaries for consistency with the forward models; the median
filter clamps to the edge (it is a robustness baseline, not part of any
adjoint-sensitive math). ``UnsharpExpansive`` has Lipschitz constant above 1
and exists to provoke solver divergence on purpose.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .bridge import DenoiserBridge
from .forward import Kernel, box_kernel, convolve_circular_folded, gaussian_kernel
from .image import Image, NonFiniteImageError

__all__ = [
    "BoxBlur",
    "Denoiser",
    "EquivariantDenoiser",
    "ExternalDenoiser",
    "GaussianSmooth",
    "Identity",
    "Median",
    "UnsharpExpansive",
    "denoise",
    "denoiser_residual",
    "equivariant_wrap",
    "make_denoiser",
]


def _gaussian_denoise_kernel(sigma: float) -> Kernel:
    # support radius ceil(4*sigma); renormalized so DC is preserved exactly
    radius = int(np.ceil(4.0 * sigma))
    return gaussian_kernel(2 * radius + 1, sigma)


class Denoiser:
    """Shape-preserving denoising operator D."""

    strength: float = 0.0  # advisory sigma_d, forwarded to external peers

    def denoise(self, x: Image) -> Image:
        raise NotImplementedError

    def __call__(self, x: Image) -> Image:
        return self.denoise(x)

    def label(self) -> str:
        return type(self).__name__.lower()


class Identity(Denoiser):
    def denoise(self, x: Image) -> Image:
        return x

    def label(self) -> str:
        return "identity"


class GaussianSmooth(Denoiser):
    def __init__(self, sigma: float):
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.sigma = float(sigma)
        self.strength = float(sigma)
        self._kernel = _gaussian_denoise_kernel(self.sigma)

    def denoise(self, x: Image) -> Image:
        return convolve_circular_folded(x, self._kernel)

    def label(self) -> str:
        return f"gaussian({self.sigma:g})"


class BoxBlur(Denoiser):
    def __init__(self, radius: int):
        if radius < 1:
            raise ValueError(f"radius must be >= 1, got {radius}")
        self.radius = int(radius)
        self._kernel = box_kernel(self.radius)

    def denoise(self, x: Image) -> Image:
        return convolve_circular_folded(x, self._kernel)

    def label(self) -> str:
        return f"box({self.radius})"


class Median(Denoiser):
    """Median filter with clamped-to-edge neighborhoods."""

    def __init__(self, radius: int):
        if radius < 1:
            raise ValueError(f"radius must be >= 1, got {radius}")
        self.radius = int(radius)

    def denoise(self, x: Image) -> Image:
        size = 2 * self.radius + 1
        out = np.stack(
            [ndimage.median_filter(ch, size=size, mode="nearest") for ch in x.data]
        )
        return Image._wrap(out)

    def label(self) -> str:
        return f"median({self.radius})"


class UnsharpExpansive(Denoiser):
    """x + alpha * (x - G_sigma * x): expansive on high frequencies.

    Amplifies any component the Gaussian attenuates, so its Lipschitz
    constant is 1 + alpha * max(1 - g_hat) > 1.
    """

    def __init__(self, alpha: float, sigma: float = 1.0):
        if alpha <= 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        if sigma <= 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.alpha = float(alpha)
        self.sigma = float(sigma)
        self._kernel = _gaussian_denoise_kernel(self.sigma)

    def denoise(self, x: Image) -> Image:
        smooth = convolve_circular_folded(x, self._kernel)
        return Image._wrap(x.data + self.alpha * (x.data - smooth.data))

    def label(self) -> str:
        return f"unsharp({self.alpha:g},{self.sigma:g})"


class ExternalDenoiser(Denoiser):
    """Denoiser behind a wire-protocol bridge; not covered by determinism guarantees."""

    def __init__(self, bridge: DenoiserBridge):
        self.bridge = bridge
        self.strength = bridge.strength

    def denoise(self, x: Image) -> Image:
        if not x.is_finite():
            raise NonFiniteImageError("refusing to send non-finite samples over the bridge")
        return Image._wrap(self.bridge.denoise_array(x.data))

    def label(self) -> str:
        return "external"


# Dihedral group of the square as (forward, inverse) array transforms on
# (C, H, W) data; index g encodes rotation k = g % 4 after an optional
# horizontal flip (g >= 4).
def _square_fwd(arr, g):
    if g >= 4:
        arr = np.flip(arr, axis=2)
    return np.rot90(arr, g % 4, axes=(1, 2))


def _square_inv(arr, g):
    arr = np.rot90(arr, -(g % 4), axes=(1, 2))
    if g >= 4:
        arr = np.flip(arr, axis=2)
    return arr


# Non-square images: the shape-preserving subgroup {id, rot180, flip-h, flip-v}.
_RECT_OPS = [
    (lambda a: a, lambda a: a),
    (lambda a: np.rot90(a, 2, axes=(1, 2)), lambda a: np.rot90(a, 2, axes=(1, 2))),
    (lambda a: np.flip(a, axis=2), lambda a: np.flip(a, axis=2)),
    (lambda a: np.flip(a, axis=1), lambda a: np.flip(a, axis=1)),
]


class EquivariantDenoiser(Denoiser):
    """Conjugates the wrapped denoiser by a random symmetry each call.

    Draws are deterministic given the seed and call index. Square images use
    the full 8-element dihedral group; non-square images fall back to the
    4-element shape-preserving subgroup.
    """

    def __init__(self, inner: Denoiser, seed: int):
        self.inner = inner
        self.seed = int(seed)
        self.strength = inner.strength
        self._rng = np.random.default_rng(seed)

    def denoise(self, x: Image) -> Image:
        if x.height == x.width:
            g = int(self._rng.integers(8))
            t = Image._wrap(np.ascontiguousarray(_square_fwd(x.data, g)))
            y = self.inner.denoise(t)
            return Image._wrap(np.ascontiguousarray(_square_inv(y.data, g)))
        fwd, inv = _RECT_OPS[int(self._rng.integers(4))]
        t = Image._wrap(np.ascontiguousarray(fwd(x.data)))
        y = self.inner.denoise(t)
        return Image._wrap(np.ascontiguousarray(inv(y.data)))

    def label(self) -> str:
        return f"equivariant({self.inner.label()})"


def equivariant_wrap(d: Denoiser, seed: int) -> EquivariantDenoiser:
    return EquivariantDenoiser(d, seed)


def denoise(d: Denoiser, x: Image) -> Image:
    return d.denoise(x)


def denoiser_residual(d: Denoiser, x: Image) -> Image:
    """The regularization direction x - D(x)."""
    return Image._wrap(x.data - d.denoise(x).data)


def make_denoiser(spec: str, strength: float | None = None) -> Denoiser:
    """Build a built-in denoiser from a compact string like ``gaussian:1.5``.

    Forms: identity | gaussian[:sigma] | box[:radius] | median[:radius]
    | unsharp[:alpha[:sigma]]. ``strength`` supplies GaussianSmooth's sigma
    when the spec omits it; other built-ins ignore it.
    """
    parts = spec.strip().lower().split(":")
    name, args = parts[0], parts[1:]
    try:
        if name == "identity" and not args:
            return Identity()
        if name == "gaussian" and len(args) <= 1:
            sigma = float(args[0]) if args else strength
            if sigma is None:
                raise ValueError("gaussian denoiser needs a sigma (or a strength)")
            return GaussianSmooth(sigma)
        if name == "box" and len(args) <= 1:
            return BoxBlur(int(args[0]) if args else 1)
        if name == "median" and len(args) <= 1:
            return Median(int(args[0]) if args else 1)
        if name == "unsharp" and len(args) <= 2:
            alpha = float(args[0]) if args else 1.0
            sigma = float(args[1]) if len(args) > 1 else 1.0
            return UnsharpExpansive(alpha, sigma)
    except (TypeError, ValueError) as e:
        raise ValueError(f"bad denoiser spec {spec!r}: {e}") from e
    raise ValueError(
        f"unknown denoiser spec {spec!r}; expected identity, gaussian[:sigma], "
        "box[:radius], median[:radius], unsharp[:alpha[:sigma]], or external"
    )
