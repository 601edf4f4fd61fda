"""Seeded synthetic ground-truth maps and PGM loading.

Two generators mirror the benchmark scenes: a structured maze of
axis-aligned walls with door gaps, and an unstructured field of circles
and ellipses. Both surround the map with boundary walls and guarantee the
free space stays 4-connected.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .grid import FREE, OCCUPIED, GroundTruthGrid, read_pgm


def _free_connected(cells: np.ndarray) -> bool:
    free = cells == FREE
    if not free.any():
        return False
    _, n = ndimage.label(free)
    return n == 1


def _clear_points(g: GroundTruthGrid, keep_clear, radius_m: float = 0.6):
    """Cells that must stay free (e.g. the robot start), as a mask."""
    mask = np.zeros_like(g.cells, dtype=bool)
    if not keep_clear:
        return mask
    rr, cc = np.mgrid[0:g.height_cells, 0:g.width_cells]
    for x, y in keep_clear:
        col, row = g.world_to_cell(x, y)
        r_cells = radius_m / g.resolution_m
        mask |= (cc - col) ** 2 + (rr - row) ** 2 <= r_cells**2
    return mask


def generate_structured_map(width_m: float, height_m: float, resolution_m: float,
                            seed: int, keep_clear=((1.2, 1.2),)) -> GroundTruthGrid:
    """Maze-like map: boundary walls plus interior wall segments with doors.

    Walls are added one at a time and kept only if the free space remains
    connected, so every free cell stays reachable.
    """
    g = GroundTruthGrid(width_m, height_m, resolution_m)
    rng = np.random.default_rng(seed)
    g.cells[0, :] = OCCUPIED
    g.cells[-1, :] = OCCUPIED
    g.cells[:, 0] = OCCUPIED
    g.cells[:, -1] = OCCUPIED
    protected = _clear_points(g, keep_clear)

    h, w = g.height_cells, g.width_cells
    n_walls = 6 + int(rng.integers(0, 6))
    door_cells = max(3, int(round(1.0 / resolution_m)))
    for _ in range(n_walls * 4):  # attempts; stop once enough walls stuck
        if n_walls == 0:
            break
        vertical = bool(rng.integers(0, 2))
        if vertical:
            col = int(rng.integers(3, w - 3))
            lo = int(rng.integers(1, h // 2))
            hi = int(rng.integers(lo + h // 4, h))
            seg = np.zeros_like(g.cells, dtype=bool)
            seg[lo:hi, col] = True
        else:
            row = int(rng.integers(3, h - 3))
            lo = int(rng.integers(1, w // 2))
            hi = int(rng.integers(lo + w // 4, w))
            seg = np.zeros_like(g.cells, dtype=bool)
            seg[row, lo:hi] = True
        # carve a door somewhere along the segment
        idx = np.flatnonzero(seg.ravel())
        if len(idx) <= 2 * door_cells:
            continue
        start = int(rng.integers(0, len(idx) - door_cells))
        seg.ravel()[idx[start:start + door_cells]] = False
        if (seg & protected).any():
            continue
        trial = g.cells.copy()
        trial[seg] = OCCUPIED
        if _free_connected(trial) and np.mean(trial == FREE) >= 0.5:
            g.cells = trial
            n_walls -= 1
    assert _free_connected(g.cells)
    return g


def ellipse_mask(xs: np.ndarray, ys: np.ndarray, cx: float, cy: float,
                 a: float, b: float, theta: float) -> np.ndarray:
    """Cells whose centers fall inside a rotated ellipse (axes a, b)."""
    ct, st = math.cos(theta), math.sin(theta)
    u = (xs - cx) * ct + (ys - cy) * st
    v = -(xs - cx) * st + (ys - cy) * ct
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def generate_unstructured_map(width_m: float, height_m: float, resolution_m: float,
                              seed: int, keep_clear=((1.2, 1.2),)) -> GroundTruthGrid:
    """Field of circle and ellipse obstacles inside boundary walls.

    Obstacles overlapping a previous one (plus clearance), the boundary
    band, or a protected point are resampled; the free fraction is kept
    at >= 0.5 and connectivity is rechecked per accepted blob.
    """
    g = GroundTruthGrid(width_m, height_m, resolution_m)
    rng = np.random.default_rng(seed)
    g.cells[0, :] = OCCUPIED
    g.cells[-1, :] = OCCUPIED
    g.cells[:, 0] = OCCUPIED
    g.cells[:, -1] = OCCUPIED
    protected = _clear_points(g, keep_clear)

    res = g.resolution_m
    rr, cc = np.mgrid[0:g.height_cells, 0:g.width_cells]
    xs = (cc + 0.5) * res
    ys = (rr + 0.5) * res
    clearance_m = 0.6
    border_m = 0.8  # free ring kept inside the boundary walls

    n_target = 8 + int(rng.integers(0, 6))
    placed = 0
    for _ in range(n_target * 20):
        if placed >= n_target:
            break
        cx = rng.uniform(border_m, width_m - border_m)
        cy = rng.uniform(border_m, height_m - border_m)
        if bool(rng.integers(0, 2)):
            a = b = rng.uniform(0.5, 1.3)
            theta = 0.0
        else:
            a = rng.uniform(0.6, 1.8)
            b = rng.uniform(0.4, 1.0)
            theta = rng.uniform(0.0, math.pi)
        blob = ellipse_mask(xs, ys, cx, cy, a, b, theta)
        grown = ellipse_mask(xs, ys, cx, cy, a + clearance_m, b + clearance_m, theta)
        near_border = ((xs < border_m) | (xs > width_m - border_m)
                       | (ys < border_m) | (ys > height_m - border_m))
        interior_occ = g.cells == OCCUPIED
        interior_occ[0, :] = interior_occ[-1, :] = False
        interior_occ[:, 0] = interior_occ[:, -1] = False
        if (grown & interior_occ).any() or (blob & near_border).any() or (blob & protected).any():
            continue
        trial = g.cells.copy()
        trial[blob] = OCCUPIED
        if np.mean(trial == FREE) < 0.5 or not _free_connected(trial):
            continue
        g.cells = trial
        placed += 1
    assert _free_connected(g.cells)
    return g


def load_map(path, resolution_m: float = 0.2) -> GroundTruthGrid:
    """Load a P2/P5 PGM ground-truth map at the given cell resolution."""
    return read_pgm(path, resolution_m=resolution_m)
