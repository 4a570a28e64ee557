"""Time-harmonic scalar field engine.

Free-space kernel is e^{-jkr}/(4*pi*r). Surfaces are discretized into
patches that re-radiate with the first Rayleigh-Sommerfeld weight
k*dA/(2*pi) and obliquity max(cos chi, 0); contributions into the back
hemisphere of a patch are zero. Multi-bounce paths are evaluated level by
level up to the configured bounce count, each hop occlusion-tested.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigUnresolvedError, ZeroDistanceError
from .geometry import Vec3
from .scene import RoomScene

C0 = 299792458.0
MIN_DISTANCE = 1e-12


@dataclass(eq=False)
class PatchSource:
    """Secondary radiator: a small planar patch with a complex surface amplitude."""

    position: Vec3
    normal: Vec3
    area: float
    amplitude: complex

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.normal = np.asarray(self.normal, dtype=float)
        if self.area <= 0:
            raise ValueError("patch area must be positive")


@dataclass(eq=False)
class PropagationConfig:
    k: float = 2.0 * np.pi * 5e9 / C0  # rad/m at 5 GHz
    max_bounce: int = 3
    patch_side: float | None = None  # defaults to lambda/4
    wall_reflectivity: complex = -1.0 + 0.0j

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("wavenumber must be positive")
        if self.max_bounce < 1:
            raise ValueError("max_bounce must be >= 1")
        if self.patch_side is None:
            self.patch_side = (2.0 * np.pi / self.k) / 4.0

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / self.k


def green(r, k: float):
    """Free-space kernel e^{-jkr}/(4 pi r); r in meters."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= MIN_DISTANCE):
        raise ZeroDistanceError("field point within 1e-12 m of a source")
    return np.exp(-1j * k * r) / (4.0 * np.pi * r)


def discretize_rectangle(rect, target_side: float):
    """Uniform patch grid tiling the rectangle exactly.

    Returns (positions (n,3), areas (n,)); patch count per axis is the
    ceiling of extent/target so patch sides never exceed the target.
    """
    nu = int(np.ceil(2.0 * rect.hu / target_side))
    nv = int(np.ceil(2.0 * rect.hv / target_side))
    du = 2.0 * rect.hu / nu
    dv = 2.0 * rect.hv / nv
    us = (np.arange(nu) + 0.5) * du - rect.hu
    vs = (np.arange(nv) + 0.5) * dv - rect.hv
    uu, vv = np.meshgrid(us, vs)
    pos = (
        rect.center[None, :]
        + uu.reshape(-1, 1) * rect.u[None, :]
        + vv.reshape(-1, 1) * rect.v[None, :]
    )
    areas = np.full(nu * nv, du * dv)
    return pos, areas


# ---------------- occlusion ----------------


class _Occluder:
    """Struct-of-arrays view of the scene rectangles for batched LoS tests."""

    def __init__(self, scene: RoomScene):
        rects = scene.all_rectangles()
        self.ids = [r.ident for r in rects]
        if rects:
            self.center = np.array([r.center for r in rects])
            self.normal = np.array([r.normal for r in rects])
            self.u = np.array([r.u for r in rects])
            self.v = np.array([r.v for r in rects])
            self.hu = np.array([r.hu for r in rects])
            self.hv = np.array([r.hv for r in rects])
        self.count = len(rects)

    def blocked(self, p: np.ndarray, q: np.ndarray, exclude=()) -> np.ndarray:
        """Boolean (len(p), len(q)) matrix: segment p_i -> q_j hits a rectangle."""
        p = np.atleast_2d(p)
        q = np.atleast_2d(q)
        d = q[None, :, :] - p[:, None, :]  # (P, Q, 3)
        seg = np.linalg.norm(d, axis=-1)
        out = np.zeros(seg.shape, dtype=bool)
        t_eps = 1e-9 / np.maximum(seg, 1e-300)
        for idx in range(self.count):
            if self.ids[idx] in exclude:
                continue
            n = self.normal[idx]
            denom = d @ n  # (P, Q)
            tvec = (self.center[idx] - p) @ n  # (P,)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = tvec[:, None] / denom
            valid = np.abs(denom) > 1e-15 * np.maximum(seg, 1.0)
            valid &= (t > t_eps) & (t < 1.0 - t_eps)
            if not valid.any():
                continue
            x = p[:, None, :] + t[..., None] * d - self.center[idx]
            a = np.abs(x @ self.u[idx]) <= self.hu[idx] + 1e-9
            b = np.abs(x @ self.v[idx]) <= self.hv[idx] + 1e-9
            out |= valid & a & b
        return out


# ---------------- radiation ----------------


def _radiate_arrays(pos, normals, areas, amps, points, k, vis=None):
    """Field at `points` from patch arrays; vis is an optional (n_patch, n_pt) mask."""
    d = points[None, :, :] - pos[:, None, :]  # (n_patch, n_pt, 3)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r <= MIN_DISTANCE):
        raise ZeroDistanceError("radiation target within 1e-12 m of a patch")
    cosx = np.einsum("pqc,pc->pq", d, normals) / r
    np.clip(cosx, 0.0, None, out=cosx)
    kern = (k * areas[:, None] / (2.0 * np.pi)) * cosx * np.exp(-1j * k * r) / r
    if vis is not None:
        kern = kern * ~vis
    return amps @ kern if amps.ndim == 1 else np.tensordot(amps, kern, axes=(0, 0))


def radiate(patches, points, k: float):
    """Superpose patch re-radiation at query points (no occlusion)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if not patches:
        return np.zeros(len(points), dtype=complex)
    pos = np.array([p.position for p in patches])
    normals = np.array([p.normal for p in patches])
    areas = np.array([p.area for p in patches])
    amps = np.array([p.amplitude for p in patches], dtype=complex)
    return _radiate_arrays(pos, normals, areas, amps, points, k)


def incident_field(sources, points, k: float, scene: RoomScene | None = None, exclude=()):
    """Sum of source kernels at each point, zeroed where line of sight is blocked."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    total = np.zeros(len(points), dtype=complex)
    if not sources:
        return total
    occ = _Occluder(scene) if scene is not None else None
    for s in sources:
        r = np.linalg.norm(points - s.position[None, :], axis=1)
        contrib = s.amplitude * green(r, k)
        if occ is not None and occ.count:
            vis = occ.blocked(s.position[None, :], points, exclude=exclude)[0]
            contrib = contrib * ~vis
        total += contrib
    return total


# ---------------- multi-bounce scene evaluation ----------------


@dataclass(eq=False)
class PatchGroup:
    """One scatterer surface: patch geometry plus per-patch reflection coefficients."""

    rect_id: str
    positions: np.ndarray
    normal: Vec3
    areas: np.ndarray
    coeff: np.ndarray  # per-patch complex reflection coefficient
    amplitudes: np.ndarray | None = None  # preset emission (injected wavefronts)

    @property
    def normals(self) -> np.ndarray:
        return np.broadcast_to(self.normal, self.positions.shape)


def _scene_groups(scene: RoomScene, cfg: PropagationConfig):
    """Scatterer groups (objects, reflective walls, deployed tiles) for the DP.

    PEC object rectangles get a front and a back group (opposite normals):
    each side responds only to illumination arriving from its own
    hemisphere and re-radiates back into it, so plates reflect from both
    faces without transmitting through.
    """
    groups = []
    for obj in scene.objects:
        for rect in obj.rectangles:
            pos, areas = discretize_rectangle(rect, cfg.patch_side)
            coeff = np.full(len(pos), -1.0 + 0.0j)
            groups.append(PatchGroup(rect.ident, pos, rect.normal, areas, coeff))
            groups.append(PatchGroup(rect.ident, pos, -rect.normal, areas, coeff.copy()))
    if cfg.wall_reflectivity != 0:
        for rect in scene.walls:
            if rect.material != "pec":
                continue
            pos, areas = discretize_rectangle(rect, cfg.patch_side)
            coeff = np.full(len(pos), complex(cfg.wall_reflectivity))
            groups.append(PatchGroup(rect.ident, pos, rect.normal, areas, coeff))
    for tile in scene.tiles:
        if not tile.deployed:
            raise ConfigUnresolvedError(f"tile {tile.ident} has no deployed state")
        gam = tile.gamma_matrix().reshape(-1)
        if not np.any(gam):
            continue  # absorbing tile: occludes but never re-radiates
        pos = tile.cell_positions()
        areas = np.full(len(pos), tile.pitch**2)
        groups.append(PatchGroup(tile.rect.ident, pos, tile.normal, areas, gam))
    return groups


def _emitter_field(emitters, occ, points, cfg, extra_exclude=(), dst_normals=None):
    total = np.zeros(len(points), dtype=complex)
    for em in emitters:
        vis = occ.blocked(em.positions, points, exclude={em.rect_id, *extra_exclude})
        if dst_normals is not None:
            d = points[None, :, :] - em.positions[:, None, :]
            vis = vis | (np.einsum("pqc,qc->pq", d, dst_normals) >= 0)
        total += _radiate_arrays(
            em.positions, em.normals, em.areas, np.asarray(em.amplitudes, complex),
            points, cfg.k, vis,
        )
    return total


def _gated_incident(sources, group, k, occ):
    """Source illumination on a group's patches, front hemisphere only."""
    pts = group.positions
    normals = group.normals
    total = np.zeros(len(pts), dtype=complex)
    for s in sources:
        d = pts - s.position[None, :]
        r = np.linalg.norm(d, axis=1)
        contrib = s.amplitude * green(r, k)
        contrib = np.where(np.einsum("qc,qc->q", d, normals) < 0, contrib, 0.0)
        if occ.count:
            vis = occ.blocked(s.position[None, :], pts, exclude={group.rect_id})[0]
            contrib = contrib * ~vis
        total += contrib
    return total


def _bounce_amplitudes(scene: RoomScene, cfg: PropagationConfig, occ, groups):
    """Per-group emitted amplitudes summed over all bounce levels <= max_bounce."""
    emitters = list(scene.injected)
    amps = []
    for g in groups:
        inc = _gated_incident(scene.sources, g, cfg.k, occ)
        inc += _emitter_field(
            emitters, occ, g.positions, cfg, extra_exclude={g.rect_id}, dst_normals=g.normals
        )
        amps.append(g.coeff * inc)
    emitted = [a.copy() for a in amps]

    hop_cache: dict = {}

    def hop_kernel(si, di):
        key = (si, di)
        if key not in hop_cache:
            gs, gd = groups[si], groups[di]
            vis = occ.blocked(gs.positions, gd.positions, exclude={gs.rect_id, gd.rect_id})
            d = gd.positions[None, :, :] - gs.positions[:, None, :]
            r = np.linalg.norm(d, axis=-1)
            if np.any(r <= MIN_DISTANCE):
                raise ZeroDistanceError("patch groups overlap")
            cosx = np.einsum("pqc,pc->pq", d, gs.normals) / r
            np.clip(cosx, 0.0, None, out=cosx)
            kern = (cfg.k * gs.areas[:, None] / (2.0 * np.pi)) * cosx * np.exp(-1j * cfg.k * r) / r
            kern = np.where(np.einsum("pqc,qc->pq", d, gd.normals) < 0, kern, 0.0)
            hop_cache[key] = kern * ~vis
        return hop_cache[key]

    for _ in range(1, cfg.max_bounce):
        nxt = []
        for di, gd in enumerate(groups):
            inc = np.zeros(len(gd.positions), dtype=complex)
            for si in range(len(groups)):
                if si != di and groups[si].rect_id != gd.rect_id:
                    inc += amps[si] @ hop_kernel(si, di)
            nxt.append(gd.coeff * inc)
        amps = nxt
        for di in range(len(groups)):
            emitted[di] += amps[di]
    return emitted


def compute_field(scene: RoomScene, cfg: PropagationConfig, points) -> np.ndarray:
    """Total field at `points`: direct illumination plus all bounce paths."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    occ = _Occluder(scene)
    groups = _scene_groups(scene, cfg)

    total = incident_field(scene.sources, points, cfg.k, scene)
    total += _emitter_field(scene.injected, occ, points, cfg)
    if not groups:
        return total

    emitted = _bounce_amplitudes(scene, cfg, occ, groups)
    for gi, g in enumerate(groups):
        vis = occ.blocked(g.positions, points, exclude={g.rect_id})
        total += _radiate_arrays(g.positions, g.normals, g.areas, emitted[gi], points, cfg.k, vis)
    return total


def array_reading(scene: RoomScene, cfg: PropagationConfig, array) -> np.ndarray:
    """compute_field at every element, reshaped row-major to (rows, cols)."""
    vals = compute_field(scene, cfg, array.positions)
    return vals.reshape(array.rows, array.cols)


def departing_amplitudes(scene: RoomScene, cfg: PropagationConfig) -> dict:
    """Per-tile emitted amplitudes (Gamma * incident, all bounce levels).

    Keys are tile ids; values are flat complex arrays over the cell grid.
    This is the quantity a wavefront-sensing tile reports.
    """
    occ = _Occluder(scene)
    groups = _scene_groups(scene, cfg)
    tile_ids = {t.rect.ident for t in scene.tiles}
    if not groups:
        return {t.ident: np.zeros(t.rows * t.cols, dtype=complex) for t in scene.tiles}
    emitted = _bounce_amplitudes(scene, cfg, occ, groups)
    out = {}
    for gi, g in enumerate(groups):
        if g.rect_id in tile_ids:
            out[g.rect_id] = emitted[gi]
    for t in scene.tiles:
        if t.ident not in out:  # absorbing tiles emit nothing
            out[t.ident] = np.zeros(t.rows * t.cols, dtype=complex)
    return out
