import math

import numpy as np
import pytest

from navgap.worldgen import INDOOR, Palette, WorldGenSpec, WorldMap, generate_world


def box_world(width_cells: int, height_cells: int, res: float = 0.25, blocks=()) -> WorldMap:
    """Walled rectangle of floor with optional wall cells at ``blocks`` (i, j)."""
    spec = WorldGenSpec(width_cells * res, height_cells * res, resolution=res, obstacle_density=0.0)
    wall, floor = INDOOR.id_of("wall"), INDOOR.id_of("floor")
    cells = np.full((height_cells, width_cells), floor, dtype=np.int16)
    cells[0, :] = cells[-1, :] = wall
    cells[:, 0] = cells[:, -1] = wall
    for i, j in blocks:
        cells[j, i] = wall
    return WorldMap(spec, 0, cells, INDOOR)


@pytest.fixture
def open_world() -> WorldMap:
    return box_world(24, 24)


@pytest.fixture
def random_world() -> WorldMap:
    return generate_world(WorldGenSpec(8.0, 8.0, obstacle_density=0.2), 11)


def close(a, b, tol=1e-12):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)
