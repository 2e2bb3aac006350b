"""Checkpoint set and the spectral-radius-driven step-size law.

Checkpoints live at t = w + k*r for integers k >= 1. At a checkpoint with
estimated spectral radius rho, the step size is multiplied by
eta = exp(-beta * (rho - 1)) when rho exceeds 1, and left alone otherwise;
the step size never increases. A small tolerance above 1 absorbs eigenvalue
noise of a converged run (whose feature dynamics has an exact eigenvalue at
1), so a stable trajectory is never perturbed by a last-bit shrink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "CheckpointEvent",
    "CheckpointRule",
    "RHO_STABILITY_TOL",
    "StepSchedule",
    "apply_checkpoint",
    "is_checkpoint",
    "shrink_factor",
]

# Stability gate: shrink only when rho > 1 + RHO_STABILITY_TOL. Converged
# trajectories put an exact eigenvalue at 1 whose numerical estimate can land
# a few ulps above it; shrinking on that noise would break determinism
# guarantees without stabilizing anything.
RHO_STABILITY_TOL = 1e-6

# Applied when the eigenvalue solver fails and no rho is available: failure
# must not silently disable stabilization.
EIGEN_FAILURE_RHO_MARGIN = 0.1


@dataclass(frozen=True)
class CheckpointRule:
    """Window size w and checkpoint stride r."""

    w: int = 30
    r: int = 10

    def __post_init__(self):
        if self.w < 2:
            raise ValueError(f"window size must be >= 2, got {self.w}")
        if self.r < 1:
            raise ValueError(f"stride must be >= 1, got {self.r}")


def is_checkpoint(rule: CheckpointRule, t: int) -> bool:
    """True iff t = w + k*r for some integer k >= 1."""
    if t < 0:
        raise ValueError(f"iteration index must be >= 0, got {t}")
    return t >= rule.w + rule.r and (t - rule.w) % rule.r == 0


def shrink_factor(rho: float, beta: float) -> float:
    """eta = exp(-beta * (rho - 1)) for rho > 1, else exactly 1."""
    if rho < 0:
        raise ValueError(f"spectral radius must be >= 0, got {rho}")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if rho <= 1.0:
        return 1.0
    return math.exp(-beta * (rho - 1.0))


@dataclass(frozen=True)
class CheckpointEvent:
    """One scheduler decision, recorded for the trajectory log."""

    t: int
    rho: float | None
    gamma_before: float
    gamma_after: float
    shrunk: bool
    eigen_failed: bool = False


@dataclass
class StepSchedule:
    """Current step size plus the shrink-only update law."""

    gamma: float
    beta: float = 2.0
    gamma_floor: float = 1e-12
    rho_tol: float = RHO_STABILITY_TOL
    history: list[CheckpointEvent] = field(default_factory=list)

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"initial step size must be positive, got {self.gamma}")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.gamma_floor <= 0:
            raise ValueError(f"gamma floor must be positive, got {self.gamma_floor}")

    def apply_checkpoint(self, t: int, rho: float | None) -> CheckpointEvent:
        """Shrink gamma per the estimated rho; rho=None means eigen failure."""
        before = self.gamma
        if rho is None:
            factor = math.exp(-self.beta * EIGEN_FAILURE_RHO_MARGIN)
            eigen_failed = True
        else:
            factor = shrink_factor(rho, self.beta) if rho > 1.0 + self.rho_tol else 1.0
            eigen_failed = False
        after = max(before * factor, self.gamma_floor)
        event = CheckpointEvent(
            t=t,
            rho=rho,
            gamma_before=before,
            gamma_after=after,
            shrunk=after != before,
            eigen_failed=eigen_failed,
        )
        self.gamma = after
        self.history.append(event)
        return event


def apply_checkpoint(sched: StepSchedule, t: int, rho: float | None) -> CheckpointEvent:
    return sched.apply_checkpoint(t, rho)
