"""Snapshot window and least-squares estimation of the feature-space operator.

Given a full window of w feature vectors, the operator K is the minimum-
Frobenius-norm minimizer of sum_t ||K psi_t - psi_{t+1}||^2, computed as
Y X^+ with the pseudoinverse truncated at a relative singular-value
tolerance. The window is routinely wider than the data rank (w - 1 < d with
the default descriptor), so the minimum-norm selection rule matters: the
spectrum of K outside the data subspace is zero, which biases toward
stability; eigen-solver failures are reported so the caller can react
conservatively in the opposite direction.

The spectral radius is evaluated on the (w-1) x (w-1) compression
A~ = U_r^T Y V_r S_r^{-1}: for K = P Q and A~ = Q P the nonzero spectra
coincide, so rho(K) = max(|eig(A~)|, 0) exactly, at a fraction of the cost
of a dense d x d eigenvalue problem.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EigenvalueError",
    "KoopmanEstimate",
    "SnapshotWindow",
    "estimate_koopman",
    "push_snapshot",
    "spectral_radius",
]

DEFAULT_REL_TOL = 1e-10


class EigenvalueError(RuntimeError):
    """Dense eigenvalue solver failed to converge."""


class SnapshotWindow:
    """Ring buffer of the most recent feature vectors, in arrival order."""

    def __init__(self, capacity: int):
        if capacity < 2:
            raise ValueError(f"window capacity must be >= 2, got {capacity}")
        self.capacity = int(capacity)
        self._entries: deque[np.ndarray] = deque(maxlen=self.capacity)
        self.dim: int | None = None

    def push(self, v) -> None:
        v = np.array(v, dtype=np.float64).reshape(-1)
        if self.dim is None:
            self.dim = v.size
        elif v.size != self.dim:
            raise ValueError(f"snapshot has dimension {v.size}, window holds {self.dim}")
        self._entries.append(v)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def is_full(self) -> bool:
        return len(self._entries) == self.capacity

    def snapshots(self) -> np.ndarray:
        """(len, dim) array of the stored vectors in arrival order."""
        if not self._entries:
            return np.empty((0, 0))
        return np.stack(self._entries)


def push_snapshot(win: SnapshotWindow, v) -> SnapshotWindow:
    win.push(v)
    return win


@dataclass(frozen=True)
class KoopmanEstimate:
    """Fitted operator, its spectral radius, and regression diagnostics."""

    matrix: np.ndarray
    spectral_radius: float
    effective_rank: int
    pairs_used: int
    degenerate: bool = False


def estimate_koopman(
    win: SnapshotWindow,
    rel_tol: float = DEFAULT_REL_TOL,
    center: bool = False,
) -> KoopmanEstimate:
    """Fit K = Y X^+ on the full window; raises EigenvalueError on eig failure."""
    if not win.is_full:
        raise ValueError(f"window holds {len(win)} of {win.capacity} snapshots")
    arr = win.snapshots()
    if center:
        arr = arr - arr.mean(axis=0)
    x = arr[:-1].T
    y = arr[1:].T
    d = x.shape[0]
    pairs = x.shape[1]
    if not x.any():
        return KoopmanEstimate(
            matrix=np.zeros((d, d)),
            spectral_radius=0.0,
            effective_rank=0,
            pairs_used=pairs,
            degenerate=True,
        )
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    keep = s > rel_tol * s[0]
    rank = int(keep.sum())
    ur = u[:, keep]
    p = (y @ vt[keep].T) / s[keep]
    matrix = p @ ur.T
    reduced = ur.T @ p
    try:
        eigs = np.linalg.eigvals(reduced)
    except np.linalg.LinAlgError as e:
        raise EigenvalueError(f"eigenvalue solver failed on {rank}x{rank} operator: {e}") from e
    rho = float(np.max(np.abs(eigs))) if eigs.size else 0.0
    return KoopmanEstimate(
        matrix=matrix,
        spectral_radius=rho,
        effective_rank=rank,
        pairs_used=pairs,
    )


def spectral_radius(k: np.ndarray) -> float:
    """max |eigenvalue| of a dense real matrix; EigenvalueError on non-convergence."""
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {k.shape}")
    if not np.isfinite(k).all():
        raise ValueError("matrix contains NaN or Inf entries")
    try:
        eigs = np.linalg.eigvals(k)
    except np.linalg.LinAlgError as e:
        raise EigenvalueError(f"eigenvalue solver failed on {k.shape[0]}x{k.shape[0]} matrix: {e}") from e
    return float(np.max(np.abs(eigs))) if eigs.size else 0.0
