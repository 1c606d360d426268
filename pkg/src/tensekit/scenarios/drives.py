"""Time-dependent drivers: seismic boundary motion and rest-length actuation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SeismicDrive", "ActuationProfile"]


@dataclass(frozen=True)
class SeismicDrive:
    """Sinusoidal ground displacement along a fixed axis.

    displacement = amplitude * sin(2 pi frequency t); velocity and
    acceleration are the exact derivatives.
    """

    amplitude: float
    frequency_hz: float
    axis: tuple

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ValueError("seismic axis must be a nonzero vector")
        object.__setattr__(self, "axis", tuple((axis / norm).tolist()))

    def motion_for(self, rest_position):
        """Motion function pinning a node to rest_position plus the drive."""
        rest = np.asarray(rest_position, dtype=float).copy()
        axis = np.array(self.axis)
        w = 2.0 * np.pi * self.frequency_hz
        amp = self.amplitude

        def motion(t):
            s, c = np.sin(w * t), np.cos(w * t)
            return (rest + amp * s * axis, amp * w * c * axis,
                    -amp * w * w * s * axis)

        return motion


@dataclass(frozen=True)
class ActuationProfile:
    """Linear rest-length schedule from an initial to a target value.

    The blending coefficient ramps linearly from 0 to 1 over the deployment
    duration and stays at 1 afterwards.
    """

    initial: float
    target: float
    duration: float

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("deployment duration must be positive")
        if self.initial <= 0 or self.target <= 0:
            raise ValueError("rest lengths must be positive")

    def coefficient(self, t: float) -> float:
        return float(np.clip(t / self.duration, 0.0, 1.0))

    def __call__(self, t: float) -> float:
        tau = self.coefficient(t)
        return (1.0 - tau) * self.initial + tau * self.target
