"""Robot poses (sensing actions) in SE(2)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    return math.pi if a <= -math.pi else a


@dataclass(frozen=True)
class Pose:
    """A candidate sensing action: position in meters plus heading."""

    x_m: float
    y_m: float
    heading_rad: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x_m) and math.isfinite(self.y_m)
                and math.isfinite(self.heading_rad)):
            raise ValueError("pose components must be finite")
        object.__setattr__(self, "heading_rad", wrap_angle(self.heading_rad))

    def as_array(self) -> np.ndarray:
        return np.array([self.x_m, self.y_m, self.heading_rad], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "Pose":
        return Pose(float(a[0]), float(a[1]), float(a[2]) if len(a) > 2 else 0.0)


def poses_to_array(poses) -> np.ndarray:
    """Stack poses (or raw triples) into an (n, 3) float array."""
    if isinstance(poses, np.ndarray) and poses.ndim == 2:
        return poses.astype(np.float64, copy=False)
    rows = [p.as_array() if isinstance(p, Pose) else np.asarray(p, dtype=np.float64) for p in poses]
    return np.stack(rows) if rows else np.empty((0, 3))
