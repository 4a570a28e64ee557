import numpy as np
import pytest

from wavecopy.presets import default_config, free_space_tile, training_room, two_room
from wavecopy.propagation import incident_field, radiate
from wavecopy.tiles import reflect


@pytest.fixture(scope="session")
def training_scene():
    return training_room()


@pytest.fixture(scope="session")
def two_room_scene():
    return two_room()


@pytest.fixture(scope="session")
def cfg():
    return default_config()


def tile_scan(tile, sources, k, angles, radius=30.0):
    """|far field| of a deployed tile over angles in its u-normal plane."""
    cells = tile.cell_positions()
    e_inc = incident_field(sources, cells, k)
    patches = reflect(tile, e_inc)
    u, n = tile.rect.u, tile.rect.normal
    pts = np.array([radius * (np.sin(a) * u + np.cos(a) * n) + tile.center for a in angles])
    return np.abs(radiate(patches, pts, k))
