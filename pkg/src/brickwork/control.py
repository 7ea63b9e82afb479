"""Trapezoidal velocity profiles and profile following with localization checkpoints."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from . import _kernels as K
from .errors import FeedbackStalled, ProgressOutOfRange

RAMP_FRACTION = K.RAMP
DEFAULT_STALL_TIMEOUT = 5.0
# floor on commanded speed, as a fraction of v_max, so the ramp can start
# from rest and the tail reaches the target in finite time
DEFAULT_CREEP_FRACTION = 0.05


@dataclass(frozen=True)
class VelocityProfile:
    target: float
    v_max: float
    ramp_fraction: float = RAMP_FRACTION

    def __post_init__(self):
        if not (math.isfinite(self.target) and self.target > 0.0):
            raise ValueError(f"target must be positive, got {self.target!r}")
        if not (math.isfinite(self.v_max) and self.v_max > 0.0):
            raise ValueError(f"v_max must be positive, got {self.v_max!r}")
        if self.ramp_fraction != RAMP_FRACTION:
            raise ValueError("ramp_fraction is fixed at 0.1")

    @property
    def checkpoints(self) -> tuple[float, float]:
        return (self.ramp_fraction * self.target, (1.0 - self.ramp_fraction) * self.target)


@dataclass(frozen=True)
class MotionCommand:
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        for name in ("vx", "vy", "omega"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def linear_speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    def within(self, v_cap: float, w_cap: float, tol: float = 1e-12) -> bool:
        return self.linear_speed <= v_cap + tol and abs(self.omega) <= w_cap + tol


def velocity_at(profile: VelocityProfile, progress: float) -> float:
    """Speed of the trapezoid at ``progress``: ramps over the first and last tenth."""
    if not (0.0 <= progress <= profile.target):
        raise ProgressOutOfRange(f"progress {progress!r} outside [0, {profile.target}]")
    return K.trapezoid_velocity(profile.target, profile.v_max, float(progress))


def follow(
    profile: VelocityProfile,
    feedback: Callable[[], float],
    dt: float,
    *,
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0),
    stall_timeout: float = DEFAULT_STALL_TIMEOUT,
    creep_fraction: float = DEFAULT_CREEP_FRACTION,
) -> Iterator[MotionCommand]:
    """Yield commands that drive ``profile.target`` along ``axis``.

    The caller applies each command for ``dt`` before asking for the next.
    Progress is dead-reckoned from the emitted speeds and replaced by
    ``feedback()`` when it first passes 1/10 and 9/10 of the target.
    ``feedback`` is also polled every step as a watchdog; if it stays
    constant for ``stall_timeout`` seconds, FeedbackStalled is raised.

    ``axis`` scales the scalar speed into (vx, vy, omega), e.g. (0, 0, -1)
    for a clockwise turn.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    target = profile.target
    creep = creep_fraction * profile.v_max
    f = np.zeros(K.FOLLOW_SIZE)
    ax, ay, aw = axis
    while True:
        v = K.follow_speed(target, profile.v_max, creep, f[K.F_PROGRESS], dt)
        yield MotionCommand(v * ax, v * ay, v * aw)
        fb = float(feedback())
        status = K.follow_update(f, target, fb, dt, stall_timeout, v)
        if status == K.STALLED:
            raise FeedbackStalled(
                f"feedback stuck at {fb:.4f} of {target:.4f} for {stall_timeout} s"
            )
        if status == K.DONE:
            return
