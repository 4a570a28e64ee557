"""Canonical scenes: the single-room training setup and the two-room copy setup.

Room 1 is 5x5x3 m with absorbing walls (anechoic training conditions).
Two colored PEC plates hang from a pivot near the north-east wall and
three point sources light their faces from the south, so the plates
reflect toward the receive side (monostatic-style).

The training corpus samples the field on a sparse wide-aperture array
half a meter from the object: in the near field every element sees the
plates from a meaningfully different angle, so the reading resolves the
object pose (at the copy standoff all rotations produce nearly identical
normalized readings). The direct source term is the same constant in
every record; learners remove it with train-split statistics.

The two-room scene appends a second 5x5x3 m room through a doorway in the
shared wall. There the room-1 array moves back to ARRAY_STANDOFF with
half-wavelength spacing and the sources get absorbing baffles, so its
reading is pure object scatter with the smooth curvature the relay can
reproduce. The routed tile on the west wall captures the object's
scattered wavefront near broadside and refocuses it through the doorway
onto the `view2` endpoint in room 2; the second array samples the copy
ARRAY_STANDOFF meters downstream of the focus, mirrored about the beam
axis, so element i sees the curvature its room-1 counterpart sees at the
same distance from the object. The doorway band passes the tile beam but
blocks the object's direct line to the viewpoint, and per-source shades
keep direct illumination out of the viewpoint region.
"""

import numpy as np

from .geometry import orthonormal_frame, unit, vec
from .propagation import C0, PropagationConfig
from .scene import (
    Camera,
    PointSource,
    ReceiveArray,
    Rectangle,
    ReflectorObject,
    RoomScene,
    los_visible,
    make_rectangle,
    planar_array,
)
from .tiles import make_tile

FREQUENCY = 5e9
WAVELENGTH = C0 / FREQUENCY
K = 2.0 * np.pi / WAVELENGTH

OBJECT_PIVOT = vec(3.8, 4.3, 1.5)
TILE1_CENTER = vec(0.012, 0.9, 1.5)
BEAM_AIM = vec(5.0, 1.10, 1.5)  # doorway crossing point of the copy beam
FOCUS_DISTANCE = 5.35  # tile -> view2 distance; keeps magnification near 1
ARRAY_STANDOFF = 3.0  # copy-scene arrays: matched curvature either side
TRAINING_STANDOFF = 0.5  # corpus array: near field, so readings resolve pose
TRAINING_SPACING = 1.2 * WAVELENGTH  # sparse grid widens the sensing aperture
DOOR_Y = (0.55, 1.33)
DOOR_Z = (1.0, 2.0)

_SOURCE_POSITIONS = [vec(4.7, 2.2, 1.8), vec(4.5, 1.2, 2.6), vec(2.6, 0.5, 2.75)]


def _box_walls(prefix: str, x0, x1, y0, y1, z0, z1):
    """Absorbing axis-aligned box; wall names: west/east/south/north/floor/ceiling."""
    cx, cy, cz = (x0 + x1) / 2, (y0 + y1) / 2, (z0 + z1) / 2
    hx, hy, hz = (x1 - x0) / 2, (y1 - y0) / 2, (z1 - z0) / 2
    spec = {
        "west": (vec(x0, cy, cz), vec(1, 0, 0), vec(0, 1, 0), hy, hz),
        "east": (vec(x1, cy, cz), vec(-1, 0, 0), vec(0, 1, 0), hy, hz),
        "south": (vec(cx, y0, cz), vec(0, 1, 0), vec(1, 0, 0), hx, hz),
        "north": (vec(cx, y1, cz), vec(0, -1, 0), vec(1, 0, 0), hx, hz),
        "floor": (vec(cx, cy, z0), vec(0, 0, 1), vec(1, 0, 0), hx, hy),
        "ceiling": (vec(cx, cy, z1), vec(0, 0, -1), vec(1, 0, 0), hx, hy),
    }
    return [
        make_rectangle(f"{prefix}_{name}", c, n, u, hu, hv, material="absorber")
        for name, (c, n, u, hu, hv) in spec.items()
    ]


def _object_plates() -> ReflectorObject:
    """Two colored PEC plates rigidly attached to the pivot."""
    plates = [
        # (offset from pivot, facing, half-extents, color)
        ((0.00, 0.02, 0.06), (0.15, -1.0, 0.20), (0.12, 0.09), 0),
        ((0.02, -0.03, -0.13), (-0.45, -0.85, -0.30), (0.09, 0.07), 1),
    ]
    rects = []
    for i, (off, facing, (hu, hv), color) in enumerate(plates):
        n = unit(vec(*facing))
        u, _ = orthonormal_frame(n)
        rects.append(
            make_rectangle(
                f"plate{i}", OBJECT_PIVOT + vec(*off), n, u, hu, hv, material="pec", color=color
            )
        )
    return ReflectorObject(rects, OBJECT_PIVOT)


def _baffle(ident: str, source: np.ndarray, block_points, keep_points, dist=0.35, pad=0.05):
    """Absorbing screen near a source covering the block directions.

    Raises if the screen would also obstruct any keep direction.
    """
    source = np.asarray(source, float)
    dirs = [unit(np.asarray(p, float) - source) for p in block_points]
    mid = unit(np.mean(dirs, axis=0))
    center = source + dist * mid
    u, v = orthonormal_frame(mid)
    hu = hv = 0.0
    for d in dirs:
        t = dist / np.dot(d, mid)
        off = source + t * d - center
        hu = max(hu, abs(np.dot(off, u)))
        hv = max(hv, abs(np.dot(off, v)))
    rect = make_rectangle(ident, center, mid, u, hu + pad, hv + pad, material="absorber")
    probe = RoomScene(walls=[rect])
    for p in keep_points:
        if not los_visible(source, p, probe):
            raise ValueError(f"baffle {ident} would block a keep direction")
    return rect


def _cameras(pivot):
    # Close, tight-angle views: the plates fill a large fraction of the
    # frame, so image metrics respond strongly to pose changes.
    return {
        "L": Camera(vec(3.38, 3.92, 1.745), pivot, vec(0, 0, 1), hfov=0.62),
        "R": Camera(vec(4.18, 3.88, 1.745), pivot, vec(0, 0, 1), hfov=0.62),
    }


def training_room() -> RoomScene:
    """Single anechoic room: object, three sources, near-field array, cameras."""
    scene = RoomScene()
    scene.walls = _box_walls("r1", 0, 5, 0, 5, 0, 3)
    scene.objects = [_object_plates()]
    pivot = scene.objects[0].pivot
    axis = unit(TILE1_CENTER - pivot)
    scene.arrays = [
        planar_array(pivot + TRAINING_STANDOFF * axis, normal=-axis, spacing=TRAINING_SPACING)
    ]
    scene.sources = [
        PointSource(pos, amplitude=1.0 + 0.0j, frequency=FREQUENCY) for pos in _SOURCE_POSITIONS
    ]
    scene.cameras = _cameras(pivot)
    return scene


def _divider_walls():
    """Shared wall at x=5 with a doorway (DOOR_Y x DOOR_Z opening)."""
    (y0, y1), (z0, z1) = DOOR_Y, DOOR_Z
    pieces = [
        ("div_s", (5, y0 / 2, 1.5), y0 / 2, 1.5),
        ("div_n", (5, (y1 + 5) / 2, 1.5), (5 - y1) / 2, 1.5),
        ("div_b", (5, (y0 + y1) / 2, z0 / 2), (y1 - y0) / 2, z0 / 2),
        ("div_t", (5, (y0 + y1) / 2, (z1 + 3) / 2), (y1 - y0) / 2, (3 - z1) / 2),
    ]
    return [
        make_rectangle(name, vec(*c), vec(1, 0, 0), vec(0, 1, 0), hu, hv, material="absorber")
        for name, c, hu, hv in pieces
    ]


def two_room() -> RoomScene:
    """Training room plus a tiled second room reached through the doorway."""
    scene = RoomScene()
    scene.walls = _box_walls("outer", 0, 10, 0, 5, 0, 3)
    scene.walls.extend(_divider_walls())
    scene.objects = [_object_plates()]
    pivot = scene.objects[0].pivot
    axis = unit(TILE1_CENTER - pivot)
    arr1 = planar_array(pivot + ARRAY_STANDOFF * axis, normal=-axis)
    scene.arrays = [arr1]
    keep = [c for r in scene.objects[0].rectangles for c in r.corners()]
    tile_corners = list(
        make_tile("tile1", TILE1_CENTER, vec(1, 0, 0), vec(0, -1, 0)).rect.corners()
    )
    for i, pos in enumerate(_SOURCE_POSITIONS):
        block = list(arr1.positions[[0, 9, 90, 99]]) + tile_corners
        scene.walls.append(_baffle(f"baffle{i}", pos, block, keep))
        scene.sources.append(PointSource(pos, amplitude=1.0 + 0.0j, frequency=FREQUENCY))
    scene.cameras = _cameras(pivot)
    scene.tiles = [
        make_tile("tile1", TILE1_CENTER, vec(1, 0, 0), vec(0, -1, 0)),
        make_tile("tile2", vec(7.5, 0.012, 1.5), vec(0, 1, 0), vec(-1, 0, 0)),
        make_tile("tile3", vec(9.988, 2.5, 1.5), vec(-1, 0, 0), vec(0, -1, 0)),
    ]
    beam = unit(BEAM_AIM - TILE1_CENTER)
    focus = TILE1_CENTER + FOCUS_DISTANCE * beam
    c2 = focus + ARRAY_STANDOFF * beam
    arr2 = planar_array(c2, normal=-beam)
    # Mirror the sampling grid about the beam axis: the relay inverts the
    # image, so element i then pairs with element i of the room-1 array.
    arr2 = ReceiveArray(2.0 * c2[None, :] - arr2.positions, arr2.rows, arr2.cols)
    scene.arrays.append(arr2)
    scene.endpoints = {"view2": focus}
    # Second screen per source: keep direct illumination off the focus
    # (the divider already hides the room-2 array), so the field at the
    # viewpoint is the copied wavefront alone.
    for i, pos in enumerate(_SOURCE_POSITIONS):
        scene.walls.append(_baffle(f"shade{i}", pos, [focus], keep, dist=0.3, pad=0.08))
    return scene


def free_space_tile() -> RoomScene:
    """One tile at the origin facing +z, lit from a distant on-axis source."""
    scene = RoomScene()
    scene.tiles = [make_tile("tile1", vec(0, 0, 0), vec(0, 0, 1), vec(1, 0, 0))]
    scene.sources = [PointSource(vec(0, 0, 50.0), amplitude=1.0 + 0.0j, frequency=FREQUENCY)]
    return scene


def default_config(max_bounce: int = 3) -> PropagationConfig:
    return PropagationConfig(k=K, max_bounce=max_bounce)


PRESETS = {
    "training-room": training_room,
    "two-room": two_room,
    "free-space-tile": free_space_tile,
}
