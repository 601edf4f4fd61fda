"""Numba-compiled hot paths: ray marching and per-action MI evaluation.

The marching rule is the package's single traversal definition: sub-cell
steps of resolution/10, keeping the first sample of each entered cell,
stopping at the first occupied cell (when an obstacle mask is given), the
max range, or the grid boundary.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .grid import RAY_SUBSTEPS_PER_CELL


@njit(cache=True)
def march_ray(x0, y0, cos_b, sin_b, max_range, ox, oy, res, w, h, occ, use_occ,
              cols, rows, entry):
    """March one ray; fills the output buffers and returns (count, hit_index, last_t).

    ``hit_index`` is -1 without a hit. ``last_t`` is the traversed distance of
    the final in-bounds sample (the miss range before max-range clamping).
    """
    step = res / RAY_SUBSTEPS_PER_CELL
    n_sub = int(math.ceil(max_range / step))
    count = 0
    hit = -1
    prev_c = -1
    prev_r = -1
    last_t = 0.0
    for i in range(n_sub + 1):
        t = i * step
        if t > max_range:
            t = max_range
        x = x0 + t * cos_b
        y = y0 + t * sin_b
        c = int(math.floor((x - ox) / res))
        r = int(math.floor((y - oy) / res))
        if i == 0:
            # origin exactly on the max edge clamps inward
            if c == w:
                c = w - 1
            if r == h:
                r = h - 1
            if c < 0:
                c = 0
            if r < 0:
                r = 0
        if c < 0 or c >= w or r < 0 or r >= h:
            break
        last_t = t
        if c != prev_c or r != prev_r:
            cols[count] = c
            rows[count] = r
            entry[count] = t
            count += 1
            prev_c = c
            prev_r = r
            if use_occ and occ[r, c] == 1:
                hit = count - 1
                break
    return count, hit, last_t


def ray_buffers(resolution_m: float, max_range_m: float):
    n = int(math.ceil(max_range_m / (resolution_m / RAY_SUBSTEPS_PER_CELL))) + 2
    return (np.empty(n, dtype=np.int64), np.empty(n, dtype=np.int64), np.empty(n))
