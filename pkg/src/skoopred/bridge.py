"""Byte-stream bridge to an out-of-process denoiser.

Wire protocol (all integers little-endian, floats IEEE-754):

* Handshake, once per connection: client sends the 8-byte magic
  ``SKOOPDN1``, then u32 C, H, W, then f32 denoiser strength sigma_d.
  The peer replies with the 4 bytes ``OKAY``.
* Request, per call: u64 frame counter, then C*H*W f32 samples in planar
  channel-major order.
* Response: the same frame counter echoed, then C*H*W f32 samples.

Any short read or write, a bad handshake reply, or a frame-counter mismatch
raises :class:`BridgeError`; the solver treats that as a fatal run error.
The connection carries one request at a time; callers must serialize.
"""

from __future__ import annotations

import struct
import subprocess

import numpy as np

from .image import ShapeMismatchError

__all__ = ["ACK", "BridgeError", "DenoiserBridge", "MAGIC", "serve_denoiser"]

MAGIC = b"SKOOPDN1"
ACK = b"OKAY"


class BridgeError(RuntimeError):
    """Fatal protocol or I/O failure on the external-denoiser connection."""


def _read_exact(reader, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = reader.read(n - len(buf))
        if not chunk:
            raise BridgeError(f"short read: wanted {n} bytes, got {len(buf)}")
        buf.extend(chunk)
    return bytes(buf)


def _write_all(writer, data: bytes) -> None:
    try:
        writer.write(data)
        writer.flush()
    except (BrokenPipeError, OSError, ValueError) as e:
        raise BridgeError(f"write failed: {e}") from e


class DenoiserBridge:
    """Client side of the wire protocol over a (reader, writer) byte-stream pair."""

    def __init__(self, reader, writer, shape: tuple[int, int, int], strength: float = 0.0,
                 process: subprocess.Popen | None = None):
        self._reader = reader
        self._writer = writer
        self.shape = tuple(int(v) for v in shape)
        self.strength = float(strength)
        self._process = process
        self._counter = 0
        self._n = self.shape[0] * self.shape[1] * self.shape[2]
        self._handshake()

    @classmethod
    def spawn(cls, cmd: list[str], shape: tuple[int, int, int], strength: float = 0.0) -> "DenoiserBridge":
        """Start ``cmd`` as a subprocess and connect over its stdin/stdout."""
        try:
            proc = subprocess.Popen(cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as e:
            raise BridgeError(f"cannot spawn external denoiser {cmd!r}: {e}") from e
        return cls(proc.stdout, proc.stdin, shape, strength, process=proc)

    def _handshake(self) -> None:
        c, h, w = self.shape
        _write_all(self._writer, MAGIC + struct.pack("<IIIf", c, h, w, self.strength))
        reply = _read_exact(self._reader, len(ACK))
        if reply != ACK:
            raise BridgeError(f"bad handshake reply {reply!r}")

    def denoise_array(self, arr: np.ndarray) -> np.ndarray:
        """One round trip; returns float64 samples (f32 precision on the wire)."""
        if arr.shape != self.shape:
            raise ShapeMismatchError("bridge request", arr.shape, self.shape)
        self._counter += 1
        payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        _write_all(self._writer, struct.pack("<Q", self._counter) + payload)
        (echo,) = struct.unpack("<Q", _read_exact(self._reader, 8))
        if echo != self._counter:
            raise BridgeError(f"frame counter mismatch: sent {self._counter}, got {echo}")
        raw = _read_exact(self._reader, 4 * self._n)
        out = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        return out.reshape(self.shape)

    def close(self) -> None:
        for stream in (self._writer, self._reader):
            try:
                stream.close()
            except OSError:
                pass
        if self._process is not None:
            self._process.wait(timeout=10)


def serve_denoiser(fn, reader, writer) -> None:
    """Peer side of the protocol: apply ``fn(arr, sigma_d) -> arr`` per frame.

    Runs until the client closes the connection. Intended for implementing
    external denoisers (see the bridge module docstring for the framing).
    """
    head = _read_exact(reader, len(MAGIC) + 16)
    if head[: len(MAGIC)] != MAGIC:
        raise BridgeError(f"bad handshake magic {head[:len(MAGIC)]!r}")
    c, h, w, sigma_d = struct.unpack("<IIIf", head[len(MAGIC):])
    n = c * h * w
    _write_all(writer, ACK)
    while True:
        try:
            header = _read_exact(reader, 8)
        except BridgeError:
            return  # client closed the stream; normal shutdown
        (counter,) = struct.unpack("<Q", header)
        raw = _read_exact(reader, 4 * n)
        arr = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(c, h, w)
        out = np.asarray(fn(arr, sigma_d), dtype=np.float64)
        if out.shape != (c, h, w):
            raise BridgeError(f"denoiser changed shape {(c, h, w)} -> {out.shape}")
        _write_all(writer, struct.pack("<Q", counter) + out.astype("<f4").tobytes())


def main(argv=None) -> int:
    """Serve the identity denoiser on stdin/stdout (loopback reference peer)."""
    import sys

    serve_denoiser(lambda arr, sigma_d: arr, sys.stdin.buffer, sys.stdout.buffer)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
