"""Image, trajectory, and snapshot file I/O.

Raw float format (suffix ``.skimg``): 8-byte magic ``SKIMG1\\0\\0``, then
u32 little-endian C, H, W (12 bytes), then C*H*W little-endian f32 samples
in planar channel-major order. Lossless at f32 precision, used wherever
PNG quantization would break round trips.

PNG: 8-bit (or 16-bit on load) with samples scaled to [0, 1]; saving clamps
to [0, 1] and quantizes round-half-up.

Trajectory CSV columns, one row per iteration:
``t,gamma,rho,psnr_db,residual_norm,t_denoise_s,t_forward_s,t_feature_s,t_koopman_s``
with rho/psnr cells empty when absent and the exact-match PSNR written as
the 99.0 sentinel. Timing columns are the only nondeterministic cells.
"""

from __future__ import annotations

import csv
import math
import struct
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .image import Image, PSNR_EXACT_DB
from .solver import TrajectoryRecord

__all__ = [
    "RAW_MAGIC",
    "load_image",
    "read_snapshots_csv",
    "save_image",
    "trajectory_csv_text",
    "write_snapshots_csv",
    "write_trajectory_csv",
]

RAW_MAGIC = b"SKIMG1\x00\x00"

TRAJECTORY_COLUMNS = (
    "t",
    "gamma",
    "rho",
    "psnr_db",
    "residual_norm",
    "t_denoise_s",
    "t_forward_s",
    "t_feature_s",
    "t_koopman_s",
)


class ImageFormatError(ValueError):
    """Unsupported or corrupt image file."""


def _save_raw(img: Image, path: Path) -> None:
    c, h, w = img.shape
    with open(path, "wb") as f:
        f.write(RAW_MAGIC + struct.pack("<III", c, h, w))
        f.write(img.data.astype("<f4").tobytes())


def _load_raw(path: Path) -> Image:
    blob = Path(path).read_bytes()
    head = len(RAW_MAGIC) + 12
    if len(blob) < head or blob[: len(RAW_MAGIC)] != RAW_MAGIC:
        raise ImageFormatError(f"{path}: not a raw image file (bad magic or truncated header)")
    c, h, w = struct.unpack("<III", blob[len(RAW_MAGIC):head])
    expected = head + 4 * c * h * w
    if len(blob) != expected:
        raise ImageFormatError(
            f"{path}: payload is {len(blob) - head} bytes, header {c}x{h}x{w} implies {expected - head}"
        )
    arr = np.frombuffer(blob[head:], dtype="<f4").astype(np.float64).reshape(c, h, w)
    return Image(arr)


def _save_png(img: Image, path: Path) -> None:
    if img.channels not in (1, 3):
        raise ImageFormatError(f"PNG output supports 1 or 3 channels, got {img.channels}")
    clamped = np.clip(img.data, 0.0, 1.0)
    quant = np.floor(clamped * 255.0 + 0.5).astype(np.uint8)  # round half up
    if img.channels == 1:
        PILImage.fromarray(quant[0], mode="L").save(path)
    else:
        PILImage.fromarray(np.moveaxis(quant, 0, 2), mode="RGB").save(path)


def _load_png(path: Path) -> Image:
    with PILImage.open(path) as pil:
        if pil.mode == "RGBA":
            pil = pil.convert("RGB")
        if pil.mode in ("L", "RGB"):
            arr = np.asarray(pil, dtype=np.float64) / 255.0
        elif pil.mode in ("I;16", "I;16B", "I"):
            arr = np.asarray(pil, dtype=np.float64) / 65535.0
        else:
            raise ImageFormatError(f"{path}: unsupported PNG mode {pil.mode!r}")
    if arr.ndim == 2:
        return Image(arr)
    return Image(np.moveaxis(arr, 2, 0))


def save_image(img: Image, path, fmt: str | None = None) -> None:
    """Write PNG (clamped, quantized) or raw float (lossless); inferred from suffix."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt == "png":
        _save_png(img, path)
    elif fmt == "skimg":
        _save_raw(img, path)
    else:
        raise ImageFormatError(f"unsupported image format {fmt!r} (use png or skimg)")


def load_image(path) -> Image:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    suffix = path.suffix.lstrip(".").lower()
    if suffix == "skimg":
        return _load_raw(path)
    if suffix == "png":
        return _load_png(path)
    raise ImageFormatError(f"unsupported image format {path.suffix!r} (use .png or .skimg)")


def _fmt_float(v: float) -> str:
    return repr(float(v))


def _fmt_psnr(v: float | None) -> str:
    if v is None:
        return ""
    if math.isinf(v) and v > 0:
        return _fmt_float(PSNR_EXACT_DB)
    return _fmt_float(v)


def trajectory_csv_text(record: TrajectoryRecord) -> str:
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for row in record.rows:
        lines.append(
            ",".join(
                (
                    str(row.t),
                    _fmt_float(row.gamma),
                    "" if row.rho is None else _fmt_float(row.rho),
                    _fmt_psnr(row.psnr_db),
                    _fmt_float(row.residual_norm),
                    _fmt_float(row.t_denoise),
                    _fmt_float(row.t_forward),
                    _fmt_float(row.t_feature),
                    _fmt_float(row.t_koopman),
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_trajectory_csv(record: TrajectoryRecord, path) -> None:
    Path(path).write_text(trajectory_csv_text(record), encoding="utf-8")


def write_snapshots_csv(snapshots: np.ndarray, path) -> None:
    """Dump a (n, d) block of feature vectors, one snapshot per row."""
    snapshots = np.asarray(snapshots, dtype=np.float64)
    if snapshots.ndim != 2:
        raise ValueError(f"expected a (n, d) snapshot block, got shape {snapshots.shape}")
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([f"f{i}" for i in range(snapshots.shape[1])])
        for row in snapshots:
            writer.writerow([_fmt_float(v) for v in row])


def read_snapshots_csv(path) -> np.ndarray:
    with open(path, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or not all(h.startswith("f") for h in header):
            raise ValueError(f"{path}: not a snapshot dump (bad header)")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: snapshot dump has no rows")
    arr = np.asarray(rows, dtype=np.float64)
    if arr.shape[1] != len(header):
        raise ValueError(f"{path}: ragged snapshot dump")
    return arr
