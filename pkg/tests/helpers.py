"""Independent oracles and fixtures shared across the test suite.

Everything here recomputes expected values by brute force (direct summation,
dense matrices, DFT diagonalization) so the library's fast paths are checked
against a second, structurally different implementation.
"""

from __future__ import annotations

import numpy as np

from skoopred import Image, Kernel


def random_image(rng, c=1, h=8, w=8, lo=0.0, hi=1.0):
    return Image(rng.uniform(lo, hi, size=(c, h, w)))


def direct_circular_convolve(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """O(N^2 * K^2) circular convolution, kernel anchored at its center tap."""
    if x.ndim == 2:
        x = x[None]
    c, h, w = x.shape
    kh, kw = taps.shape
    ch, cw = kh // 2, kw // 2
    out = np.zeros_like(x, dtype=np.float64)
    for ci in range(c):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for p in range(kh):
                    for q in range(kw):
                        acc += taps[p, q] * x[ci, (i - (p - ch)) % h, (j - (q - cw)) % w]
                out[ci, i, j] = acc
    return out


def direct_dct_lowfreq(plane: np.ndarray) -> np.ndarray:
    """O(N^2) orthonormal DCT-II coefficients (0,0), (0,1), (1,0), (1,1)."""
    h, w = plane.shape
    out = np.zeros(4)
    for idx, (u, v) in enumerate(((0, 0), (0, 1), (1, 0), (1, 1))):
        au = np.sqrt((1.0 if u == 0 else 2.0) / h)
        av = np.sqrt((1.0 if v == 0 else 2.0) / w)
        acc = 0.0
        for i in range(h):
            for j in range(w):
                acc += (
                    plane[i, j]
                    * np.cos(np.pi * (2 * i + 1) * u / (2 * h))
                    * np.cos(np.pi * (2 * j + 1) * v / (2 * w))
                )
        out[idx] = au * av * acc
    return out


def operator_matrix(apply_fn, in_shape, out_shape=None) -> np.ndarray:
    """Dense matrix of a linear operator by probing with basis vectors."""
    n = int(np.prod(in_shape))
    out_shape = out_shape or in_shape
    m = int(np.prod(out_shape))
    mat = np.zeros((m, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        mat[:, i] = apply_fn(e.reshape(in_shape)).reshape(-1)
    return mat


def kernel_transfer(kernel: Kernel, h: int, w: int) -> np.ndarray:
    """Full complex DFT transfer function of the embedded kernel."""
    kh, kw = kernel.taps.shape
    emb = np.zeros((h, w))
    emb[:kh, :kw] = kernel.taps
    emb = np.roll(emb, (-(kh // 2), -(kw // 2)), axis=(0, 1))
    return np.fft.fft2(emb)


def synth_scene(h=64, w=64, texture_band=(14, 30), texture_std=0.11, seed=1234) -> Image:
    """Smooth synthetic scene plus broadband texture in a mid/high-frequency band."""
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    img = 0.5 + 0.16 * np.sin(2 * np.pi * (3 * yy + 2 * xx) / h)
    img += 0.13 * np.exp(-((yy - h / 3) ** 2 + (xx - w / 3) ** 2) / (2 * 6.0**2))
    img -= 0.11 * np.exp(-((yy - 2 * h / 3) ** 2 + (xx - 0.72 * w) ** 2) / (2 * 9.0**2))
    if texture_std > 0:
        rng = np.random.default_rng(seed)
        f = np.fft.fft2(rng.standard_normal((h, w)))
        ky = np.minimum(np.arange(h), h - np.arange(h))[:, None]
        kx = np.minimum(np.arange(w), w - np.arange(w))[None, :]
        kr = np.hypot(ky, kx)
        band = (kr >= texture_band[0]) & (kr <= texture_band[1])
        tex = np.fft.ifft2(f * band).real
        img += tex * (texture_std / tex.std())
    return Image(np.clip(img, 0.02, 0.98))


MOTION_KERNEL_TEXT = """\
# synthetic diagonal motion streak
5 5
0.00 0.00 0.00 0.05 0.10
0.00 0.00 0.10 0.20 0.05
0.00 0.10 0.30 0.10 0.00
0.05 0.20 0.10 0.00 0.00
0.10 0.05 0.00 0.00 0.00
"""
