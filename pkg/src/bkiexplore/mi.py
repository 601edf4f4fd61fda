"""Exact expected Shannon mutual information of candidate sensing actions.

This is the explicit (expensive) evaluation path: each beam of the
candidate scan is traversed over the current belief map and the expected
entropy reduction is computed by enumerating the beam's measurement
outcomes ("first hit at cell j" for each traversed cell, plus a miss).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .grid import OccupancyGrid, binary_entropy, raycast
from .pose import Pose
from .sensor import SensorSpec


@dataclass
class MiResult:
    mi_bits: float
    per_beam_bits: np.ndarray
    eval_time_s: float


def beam_outcome_probs(p: np.ndarray) -> np.ndarray:
    """Outcome distribution over a beam's cells with probabilities ``p``.

    Entry j < n is the probability the beam first hits cell j; the last
    entry is the miss probability. Sums to 1 exactly up to rounding.
    """
    p = np.asarray(p, dtype=np.float64)
    q = 1.0 - p
    cq = np.cumprod(q)
    before = np.concatenate(([1.0], cq[:-1]))
    return np.concatenate((p * before, [cq[-1] if len(p) else 1.0]))


def mi_from_cell_probs(p: np.ndarray) -> float:
    """Expected entropy reduction for one beam given its cells' occupancy."""
    p = np.asarray(p, dtype=np.float64)
    if len(p) == 0:
        return 0.0
    h = binary_entropy(p)
    probs = beam_outcome_probs(p)
    # hit at j resolves cells 0..j; a miss resolves all of them
    suffix = np.concatenate((np.cumsum(h[::-1])[::-1][1:], [0.0]))
    posterior = float(np.dot(probs[:-1], suffix))
    return max(float(h.sum()) - posterior, 0.0)


def beam_mi(grid: OccupancyGrid, pose: Pose, bearing: float, spec: SensorSpec) -> float:
    """MI of a single beam over the current belief, in bits.

    The traversal runs to max range or the boundary regardless of the
    current belief; believed obstacles enter through the outcome
    probabilities rather than by truncating the ray.
    """
    ray = raycast(grid, pose, bearing, spec.max_range_m)
    probs = grid.probabilities()
    p = probs[ray.cells[:, 1], ray.cells[:, 0]]
    return mi_from_cell_probs(p)


def action_mi(grid: OccupancyGrid, action: Pose, spec: SensorSpec,
              probs: np.ndarray | None = None) -> MiResult:
    """MI of a candidate action: sum of its beams' MI, with wall-clock timing.

    ``probs`` may pass a precomputed ``grid.probabilities()`` snapshot when
    many actions are evaluated against the same frozen belief.
    """
    t0 = time.perf_counter()
    if not grid.world_in_bounds(action.x_m, action.y_m):
        raise ValueError(f"action ({action.x_m}, {action.y_m}) outside the grid")
    if probs is None:
        probs = grid.probabilities()
    per_beam = np.empty(spec.n_beams)
    for i, b in enumerate(spec.bearings(action.heading_rad)):
        ray = raycast(grid, action, b, spec.max_range_m)
        p = probs[ray.cells[:, 1], ray.cells[:, 0]]
        per_beam[i] = mi_from_cell_probs(p)
    return MiResult(mi_bits=float(per_beam.sum()), per_beam_bits=per_beam,
                    eval_time_s=time.perf_counter() - t0)


def normalize_mi(values: np.ndarray) -> np.ndarray:
    """Reporting transform to the [0, 1] bit display scale (divide by max)."""
    values = np.asarray(values, dtype=np.float64)
    m = values.max() if len(values) else 0.0
    return values / m if m > 0 else values
