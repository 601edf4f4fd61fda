"""Occupancy grids, ground-truth grids, raycasting, and PGM map I/O."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FREE = 0
OCCUPIED = 1

# Fraction of a cell used as the raycast sub-step. Fine enough that no
# traversed cell is skipped at any bearing.
RAY_SUBSTEPS_PER_CELL = 10


class MapFormatError(ValueError):
    """Raised on malformed PGM input; carries the offending byte offset."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


@dataclass(frozen=True)
class InverseSensorModel:
    """Log-odds increments for occupied/free observations and the clamp."""

    l_occ: float = 0.85
    l_free: float = -0.4
    l_clamp: float = 6.0

    def __post_init__(self):
        if self.l_occ <= 0 or self.l_free >= 0 or self.l_clamp <= 0:
            raise ValueError("need l_occ > 0, l_free < 0, l_clamp > 0")


def _grid_dims(width_m: float, height_m: float, resolution_m: float) -> tuple[int, int]:
    if width_m <= 0 or height_m <= 0 or resolution_m <= 0:
        raise ValueError("grid dimensions and resolution must be positive")
    # round up so the requested extent is always covered
    w = int(math.ceil(round(width_m / resolution_m, 9)))
    h = int(math.ceil(round(height_m / resolution_m, 9)))
    return w, h


class _GridBase:
    width_cells: int
    height_cells: int
    resolution_m: float
    origin_m: tuple[float, float]

    @property
    def width_m(self) -> float:
        return self.width_cells * self.resolution_m

    @property
    def height_m(self) -> float:
        return self.height_cells * self.resolution_m

    def in_bounds(self, col: int, row: int) -> bool:
        return 0 <= col < self.width_cells and 0 <= row < self.height_cells

    def world_in_bounds(self, x_m: float, y_m: float) -> bool:
        ox, oy = self.origin_m
        return (ox <= x_m <= ox + self.width_m) and (oy <= y_m <= oy + self.height_m)

    def world_to_cell(self, x_m: float, y_m: float) -> tuple[int, int]:
        """Cell containing a world point; points on the max edge clamp inward."""
        ox, oy = self.origin_m
        col = int(math.floor((x_m - ox) / self.resolution_m))
        row = int(math.floor((y_m - oy) / self.resolution_m))
        col = min(max(col, 0), self.width_cells - 1)
        row = min(max(row, 0), self.height_cells - 1)
        return col, row

    def cell_center(self, col: int, row: int) -> tuple[float, float]:
        ox, oy = self.origin_m
        return (ox + (col + 0.5) * self.resolution_m, oy + (row + 0.5) * self.resolution_m)

    def _check_cell(self, col: int, row: int) -> None:
        if not self.in_bounds(col, row):
            raise IndexError(f"cell ({col}, {row}) outside {self.width_cells}x{self.height_cells} grid")


class OccupancyGrid(_GridBase):
    """Log-odds occupancy belief over a fixed-resolution 2D lattice.

    A fresh grid is uniform (log-odds 0 everywhere, p = 0.5). Updates add
    the inverse-sensor-model increments and clamp to +/- l_clamp, so cell
    probabilities always stay strictly inside (0, 1).
    """

    def __init__(self, width_m: float, height_m: float, resolution_m: float,
                 origin_m: tuple[float, float] = (0.0, 0.0),
                 model: InverseSensorModel = InverseSensorModel()):
        self.width_cells, self.height_cells = _grid_dims(width_m, height_m, resolution_m)
        self.resolution_m = float(resolution_m)
        self.origin_m = (float(origin_m[0]), float(origin_m[1]))
        self.model = model
        self.log_odds = np.zeros((self.height_cells, self.width_cells), dtype=np.float64)

    def probabilities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.log_odds))

    def cell_probability(self, col: int, row: int) -> float:
        self._check_cell(col, row)
        return 1.0 / (1.0 + math.exp(-self.log_odds[row, col]))

    def update_cell(self, col: int, row: int, observed_occupied: bool) -> None:
        self._check_cell(col, row)
        inc = self.model.l_occ if observed_occupied else self.model.l_free
        c = self.model.l_clamp
        self.log_odds[row, col] = min(max(self.log_odds[row, col] + inc, -c), c)

    def update_cells(self, cols: np.ndarray, rows: np.ndarray, occupied: np.ndarray) -> None:
        """Vectorized update of distinct cells (no duplicates within a call)."""
        inc = np.where(occupied, self.model.l_occ, self.model.l_free)
        c = self.model.l_clamp
        self.log_odds[rows, cols] = np.clip(self.log_odds[rows, cols] + inc, -c, c)

    def cell_entropy(self, col: int, row: int) -> float:
        self._check_cell(col, row)
        return float(binary_entropy(np.array(self.cell_probability(col, row))))

    def map_entropy(self) -> float:
        """Total map entropy in bits (sum of per-cell binary entropies)."""
        return float(binary_entropy(self.probabilities()).sum())

    def coverage(self, truth: "GroundTruthGrid", known_threshold: float = 0.25) -> float:
        """Fraction of cells whose belief left the uniform prior by the threshold."""
        if (truth.width_cells, truth.height_cells) != (self.width_cells, self.height_cells):
            raise ValueError("ground-truth dimensions do not match the belief grid")
        if not 0.0 < known_threshold < 0.5:
            raise ValueError("known_threshold must lie in (0, 0.5)")
        p = self.probabilities()
        return float(np.mean(np.abs(p - 0.5) >= known_threshold))


class GroundTruthGrid(_GridBase):
    """Binary FREE/OCCUPIED map used as the simulation oracle."""

    def __init__(self, width_m: float, height_m: float, resolution_m: float,
                 origin_m: tuple[float, float] = (0.0, 0.0)):
        self.width_cells, self.height_cells = _grid_dims(width_m, height_m, resolution_m)
        self.resolution_m = float(resolution_m)
        self.origin_m = (float(origin_m[0]), float(origin_m[1]))
        self.cells = np.full((self.height_cells, self.width_cells), FREE, dtype=np.uint8)

    def is_occupied(self, col: int, row: int) -> bool:
        self._check_cell(col, row)
        return bool(self.cells[row, col] == OCCUPIED)

    def occupied_mask(self) -> np.ndarray:
        return self.cells == OCCUPIED

    def free_fraction(self) -> float:
        return float(np.mean(self.cells == FREE))

    def matching_belief_grid(self, model: InverseSensorModel = InverseSensorModel()) -> OccupancyGrid:
        g = OccupancyGrid(self.width_m, self.height_m, self.resolution_m, self.origin_m, model)
        assert (g.width_cells, g.height_cells) == (self.width_cells, self.height_cells)
        return g


def binary_entropy(p: np.ndarray) -> np.ndarray:
    """Elementwise -p log2 p - (1-p) log2 (1-p), continuously extended to 0/1."""
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
              + np.where(p < 1, (1 - p) * np.log2(np.where(p < 1, 1 - p, 1.0)), 0.0))
    return h


@dataclass
class CellRay:
    """Cells traversed by a ray, in order from the origin cell outward."""

    cells: np.ndarray  # (n, 2) int array of (col, row)
    hit: bool
    hit_index: Optional[int]
    range_m: float
    entry_m: np.ndarray = field(repr=False, default=None)  # distance at first entry per cell

    def __len__(self) -> int:
        return len(self.cells)


def raycast(grid, pose, bearing: float, max_range_m: float) -> CellRay:
    """Trace a ray across the lattice by fine sub-cell stepping.

    ``grid`` may be a GroundTruthGrid (the ray terminates at the first
    OCCUPIED cell) or an OccupancyGrid (pure traversal up to max range or
    the boundary; belief never stops the ray). ``pose`` is anything with
    ``x_m``/``y_m`` attributes or an (x, y) pair.
    """
    from ._fast import march_ray, ray_buffers  # deferred: avoids an import cycle

    if max_range_m <= 0:
        raise ValueError("max_range_m must be positive")
    x0, y0 = (pose.x_m, pose.y_m) if hasattr(pose, "x_m") else (float(pose[0]), float(pose[1]))
    if not grid.world_in_bounds(x0, y0):
        raise ValueError(f"ray origin ({x0}, {y0}) outside the grid")

    use_occ = hasattr(grid, "occupied_mask")
    occ = grid.cells if use_occ else np.zeros((1, 1), dtype=np.uint8)
    cols, rows, entry = ray_buffers(grid.resolution_m, max_range_m)
    count, hit_index, last_t = march_ray(
        x0, y0, math.cos(bearing), math.sin(bearing), float(max_range_m),
        grid.origin_m[0], grid.origin_m[1], grid.resolution_m,
        grid.width_cells, grid.height_cells, occ, use_occ, cols, rows, entry)

    hit = hit_index >= 0
    if hit:
        range_m = float(entry[hit_index])
    else:
        hit_index = None
        range_m = float(last_t)
    cells = np.stack([cols[:count].copy(), rows[:count].copy()], axis=1)
    return CellRay(cells=cells, hit=hit, hit_index=hit_index, range_m=range_m,
                   entry_m=entry[:count].copy())


# ---------------------------------------------------------------------------
# PGM import/export. Convention: one pixel = one cell, image row 0 is the
# top of the image, which maps to max-y in world coordinates. On import,
# pixel >= 205 -> FREE, anything else -> OCCUPIED (there is no unknown
# state in ground truth).

PGM_FREE_LEVEL = 205


def load_pgm(path) -> GroundTruthGrid:
    return pgm_to_truth(_read_pgm_pixels(path)[0], resolution_m=1.0)


def read_pgm(path, resolution_m: float = 1.0,
             origin_m: tuple[float, float] = (0.0, 0.0)) -> GroundTruthGrid:
    pixels, _ = _read_pgm_pixels(path)
    return pgm_to_truth(pixels, resolution_m, origin_m)


def pgm_to_truth(pixels: np.ndarray, resolution_m: float,
                 origin_m: tuple[float, float] = (0.0, 0.0)) -> GroundTruthGrid:
    h, w = pixels.shape
    g = GroundTruthGrid(w * resolution_m, h * resolution_m, resolution_m, origin_m)
    occ = pixels < PGM_FREE_LEVEL
    g.cells[:, :] = np.where(occ[::-1], OCCUPIED, FREE)  # flip: image top = max y
    return g


def write_pgm(truth: GroundTruthGrid, path, binary: bool = True) -> None:
    pixels = np.where(truth.cells[::-1] == OCCUPIED, 0, 254).astype(np.uint8)
    h, w = pixels.shape
    with open(path, "wb") as f:
        if binary:
            f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            f.write(pixels.tobytes())
        else:
            f.write(f"P2\n{w} {h}\n255\n".encode("ascii"))
            for row in pixels:
                f.write((" ".join(str(int(v)) for v in row) + "\n").encode("ascii"))


def _read_pgm_pixels(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as f:
        data = f.read()
    pos = 0

    def skip_ws(pos: int) -> int:
        while pos < len(data):
            if data[pos:pos + 1].isspace():
                pos += 1
            elif data[pos:pos + 1] == b"#":
                while pos < len(data) and data[pos] != 0x0A:
                    pos += 1
            else:
                break
        return pos

    def token(pos: int) -> tuple[bytes, int]:
        pos = skip_ws(pos)
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MapFormatError("unexpected end of file", start)
        return data[start:pos], pos

    magic, pos = token(pos)
    if magic not in (b"P2", b"P5"):
        raise MapFormatError(f"not a PGM file (magic {magic!r})", 0)
    fields = []
    for _ in range(3):
        tok, pos = token(pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise MapFormatError(f"invalid header token {tok!r}", pos - len(tok)) from None
    w, h, maxval = fields
    if w <= 0 or h <= 0:
        raise MapFormatError(f"invalid dimensions {w}x{h}", 0)
    if not 0 < maxval <= 255:
        raise MapFormatError(f"unsupported maxval {maxval}", 0)

    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        end = pos + w * h
        if end > len(data):
            raise MapFormatError(f"truncated pixel data, need {w * h} bytes", pos)
        pixels = np.frombuffer(data[pos:end], dtype=np.uint8).reshape(h, w).astype(np.int64)
    else:
        vals = np.empty(w * h, dtype=np.int64)
        for i in range(w * h):
            tok, pos = token(pos)
            try:
                vals[i] = int(tok)
            except ValueError:
                raise MapFormatError(f"invalid pixel token {tok!r}", pos - len(tok)) from None
        pixels = vals.reshape(h, w)
    if (pixels > maxval).any() or (pixels < 0).any():
        raise MapFormatError("pixel value outside [0, maxval]", 0)
    if maxval != 255:
        pixels = pixels * 255 // maxval
    return pixels, maxval
