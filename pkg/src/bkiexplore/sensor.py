"""Simulated beam-based range sensor and scan integration into the belief grid."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import OccupancyGrid, GroundTruthGrid, CellRay, raycast
from .pose import Pose


class InvalidPoseError(ValueError):
    pass


@dataclass(frozen=True)
class SensorSpec:
    """Field of view (symmetric half-angle), angular layout, and max range.

    Exactly one of ``beam_step_rad`` (angular resolution) or ``beam_count``
    must be given.
    """

    fov_rad: float
    max_range_m: float
    beam_step_rad: float | None = None
    beam_count: int | None = None

    def __post_init__(self):
        if not 0.0 < self.fov_rad <= math.pi:
            raise ValueError("fov_rad must lie in (0, pi]")
        if self.max_range_m <= 0:
            raise ValueError("max_range_m must be positive")
        if (self.beam_step_rad is None) == (self.beam_count is None):
            raise ValueError("specify exactly one of beam_step_rad or beam_count")
        if self.beam_step_rad is not None and self.beam_step_rad <= 0:
            raise ValueError("beam_step_rad must be positive")
        if self.beam_count is not None and self.beam_count < 1:
            raise ValueError("beam_count must be >= 1")

    @property
    def n_beams(self) -> int:
        if self.beam_count is not None:
            return self.beam_count
        return int(math.floor(round(2.0 * self.fov_rad / self.beam_step_rad, 9))) + 1

    def bearings(self, heading_rad: float = 0.0) -> np.ndarray:
        """Absolute beam bearings, evenly spaced across the FOV."""
        if self.beam_count is not None:
            if self.beam_count == 1:
                rel = np.array([0.0])
            else:
                rel = np.linspace(-self.fov_rad, self.fov_rad, self.beam_count)
        else:
            rel = -self.fov_rad + np.arange(self.n_beams) * self.beam_step_rad
        return heading_rad + rel


@dataclass
class Beam:
    bearing_rad: float
    range_m: float
    hit: bool
    ray: CellRay = field(repr=False, default=None)


@dataclass
class BeamScan:
    pose: Pose
    beams: list[Beam]


def simulate_scan(truth: GroundTruthGrid, pose: Pose, spec: SensorSpec) -> BeamScan:
    """Noise-free scan against ground truth, one beam per bearing."""
    if not truth.world_in_bounds(pose.x_m, pose.y_m):
        raise InvalidPoseError(f"pose ({pose.x_m}, {pose.y_m}) outside the map")
    col, row = truth.world_to_cell(pose.x_m, pose.y_m)
    if truth.is_occupied(col, row):
        raise InvalidPoseError(f"pose cell ({col}, {row}) is occupied in ground truth")
    beams = []
    for b in spec.bearings(pose.heading_rad):
        ray = raycast(truth, pose, b, spec.max_range_m)
        rng = ray.range_m if ray.hit else spec.max_range_m
        beams.append(Beam(bearing_rad=float(b), range_m=float(rng), hit=ray.hit, ray=ray))
    return BeamScan(pose=pose, beams=beams)


def integrate_scan(grid: OccupancyGrid, scan: BeamScan) -> None:
    """Apply the inverse sensor model along every beam of a scan.

    Traversed pre-hit cells update FREE, the hit cell updates OCCUPIED;
    each cell updates at most once per scan (first touch wins), so
    overlapping near-origin cells are not multiply counted.
    """
    cols, rows, occs = [], [], []
    for beam in scan.beams:
        cells = beam.ray.cells
        if len(cells) == 0:
            continue
        occ = np.zeros(len(cells), dtype=bool)
        if beam.hit:
            occ[beam.ray.hit_index] = True
        cols.append(cells[:, 0])
        rows.append(cells[:, 1])
        occs.append(occ)
    if not cols:
        return
    cols = np.concatenate(cols)
    rows = np.concatenate(rows)
    occs = np.concatenate(occs)
    flat = rows * grid.width_cells + cols
    _, first = np.unique(flat, return_index=True)
    grid.update_cells(cols[first], rows[first], occs[first])
