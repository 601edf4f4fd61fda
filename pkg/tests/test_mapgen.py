import numpy as np
import pytest
from scipy import ndimage

from bkiexplore import (generate_structured_map, generate_unstructured_map,
                        load_map, write_pgm)
from bkiexplore.grid import FREE, OCCUPIED
from bkiexplore.mapgen import ellipse_mask


def _one_free_component(cells):
    _, n = ndimage.label(cells == FREE)
    return n == 1


@pytest.mark.parametrize("gen", [generate_structured_map, generate_unstructured_map])
@pytest.mark.parametrize("seed", [0, 1, 7, 42])
def test_maps_are_bounded_connected_and_mostly_free(gen, seed):
    t = gen(24.0, 14.0, 0.2, seed)
    assert (t.width_cells, t.height_cells) == (120, 70)
    assert np.all(t.cells[0, :] == OCCUPIED) and np.all(t.cells[-1, :] == OCCUPIED)
    assert np.all(t.cells[:, 0] == OCCUPIED) and np.all(t.cells[:, -1] == OCCUPIED)
    assert t.free_fraction() >= 0.5
    assert _one_free_component(t.cells)
    # default start location stays free
    col, row = t.world_to_cell(1.2, 1.2)
    assert t.cells[row, col] == FREE


@pytest.mark.parametrize("gen", [generate_structured_map, generate_unstructured_map])
def test_generation_is_seed_deterministic(gen):
    a = gen(12.0, 8.0, 0.2, 3)
    b = gen(12.0, 8.0, 0.2, 3)
    c = gen(12.0, 8.0, 0.2, 4)
    assert np.array_equal(a.cells, b.cells)
    assert not np.array_equal(a.cells, c.cells)


def test_structured_map_has_interior_walls():
    t = generate_structured_map(24.0, 14.0, 0.2, 0)
    interior = t.cells[1:-1, 1:-1]
    assert (interior == OCCUPIED).sum() > 50


def test_unstructured_map_has_interior_obstacles():
    t = generate_unstructured_map(24.0, 14.0, 0.2, 0)
    interior = t.cells[1:-1, 1:-1]
    assert (interior == OCCUPIED).sum() > 50
    # obstacles keep a free band inside the boundary walls
    assert np.all(t.cells[1:3, 1:-1] == FREE)
    assert np.all(t.cells[-3:-1, 1:-1] == FREE)


def test_ellipse_mask_against_per_cell_oracle():
    rng = np.random.default_rng(2)
    ys, xs = np.mgrid[0:30, 0:40] * 0.25 + 0.125
    for _ in range(20):
        cx, cy = rng.uniform(1, 9), rng.uniform(1, 6)
        a, b = rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0)
        theta = rng.uniform(0, np.pi)
        mask = ellipse_mask(xs, ys, cx, cy, a, b, theta)
        ct, st = np.cos(theta), np.sin(theta)
        for r in range(0, 30, 7):
            for c in range(0, 40, 9):
                x, y = xs[r, c], ys[r, c]
                u = (x - cx) * ct + (y - cy) * st
                v = -(x - cx) * st + (y - cy) * ct
                assert mask[r, c] == ((u / a) ** 2 + (v / b) ** 2 <= 1.0)


def test_generated_map_survives_pgm_round_trip(tmp_path):
    t = generate_structured_map(10.0, 8.0, 0.2, 5)
    path = tmp_path / "m.pgm"
    write_pgm(t, path)
    back = load_map(path, resolution_m=0.2)
    assert np.array_equal(back.cells, t.cells)
    assert back.resolution_m == t.resolution_m
