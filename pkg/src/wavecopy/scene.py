"""Rooms, reflector objects, sources, arrays, cameras and occlusion tests.

Scenes are immutable value objects: every operation returns a new scene or
a plain result, so field evaluation can run from any number of workers.
Units are strictly meters and radians.
"""

import copy
import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateCameraError, SceneValidationError
from .geometry import Vec3, rotation_zyx, unit, vec

GRAZE_TOL = 1e-9  # segment-rectangle clearance below which we call it blocked

# Flat palette for reflector coloring (index 0..7), RGB uint8.
PALETTE = np.array(
    [
        [230, 60, 50],
        [50, 120, 230],
        [60, 180, 90],
        [240, 190, 40],
        [170, 80, 200],
        [240, 130, 40],
        [70, 200, 200],
        [120, 90, 60],
    ],
    dtype=np.uint8,
)


@dataclass(eq=False)
class Rectangle:
    """Planar rectangle: center, orthonormal frame (normal, u, v), half-extents."""

    ident: str
    center: Vec3
    normal: Vec3
    u: Vec3
    v: Vec3
    hu: float
    hv: float
    material: str = "pec"  # "pec" | "absorber" | "sdm"
    color: int = 0

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.normal = np.asarray(self.normal, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.hu <= 0 or self.hv <= 0:
            raise ValueError("rectangle half-extents must be positive")
        gram = np.abs(
            np.array(
                [
                    np.dot(self.normal, self.u),
                    np.dot(self.normal, self.v),
                    np.dot(self.u, self.v),
                    np.dot(self.normal, self.normal) - 1.0,
                    np.dot(self.u, self.u) - 1.0,
                    np.dot(self.v, self.v) - 1.0,
                ]
            )
        )
        if gram.max() > 1e-9:
            raise ValueError(f"rectangle {self.ident}: frame is not orthonormal")

    @property
    def area(self) -> float:
        return 4.0 * self.hu * self.hv

    def corners(self) -> np.ndarray:
        c, u, v = self.center, self.u * self.hu, self.v * self.hv
        return np.array([c + u + v, c - u + v, c - u - v, c + u - v])


def make_rectangle(ident, center, normal, u_axis, hu, hv, material="pec", color=0):
    """Rectangle from a normal plus one in-plane axis (v completes the frame)."""
    n = unit(normal)
    u = unit(np.asarray(u_axis, dtype=float) - np.dot(u_axis, n) * n)
    v = np.cross(n, u)
    return Rectangle(ident, np.asarray(center, float), n, u, v, hu, hv, material, color)


@dataclass(eq=False)
class PointSource:
    position: Vec3
    amplitude: complex = 1.0 + 0.0j
    frequency: float = 5e9

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if not self.frequency > 0:
            raise ValueError("source frequency must be positive")


@dataclass(eq=False)
class ReceiveArray:
    positions: np.ndarray  # (rows*cols, 3), row-major
    rows: int
    cols: int

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if self.rows * self.cols != len(self.positions):
            raise ValueError("rows*cols must equal the element count")

    @property
    def center(self) -> Vec3:
        return self.positions.mean(axis=0)


def planar_array(center, normal, rows=10, cols=10, spacing=None, u_axis=None) -> ReceiveArray:
    """Rows x cols planar grid facing `normal`; spacing defaults to lambda/2 at 5 GHz."""
    if spacing is None:
        spacing = 299792458.0 / 5e9 / 2.0
    n = unit(normal)
    if u_axis is None:
        helper = np.array([0.0, 0.0, 1.0])
        if abs(np.dot(n, helper)) > 0.9:
            helper = np.array([1.0, 0.0, 0.0])
        u = unit(np.cross(helper, n))
    else:
        u = unit(np.asarray(u_axis, float) - np.dot(u_axis, n) * n)
    v = np.cross(n, u)
    center = np.asarray(center, dtype=float)
    pts = []
    for r in range(rows):
        for c in range(cols):
            du = (c - (cols - 1) / 2.0) * spacing
            dv = (r - (rows - 1) / 2.0) * spacing
            pts.append(center + du * u + dv * v)
    return ReceiveArray(np.array(pts), rows, cols)


@dataclass(eq=False)
class Camera:
    position: Vec3
    look_at: Vec3
    up: Vec3
    hfov: float  # horizontal field of view, radians
    width: int = 64
    height: int = 64

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.look_at = np.asarray(self.look_at, dtype=float)
        self.up = np.asarray(self.up, dtype=float)
        if not 0.0 < self.hfov < np.pi:
            raise ValueError("hfov must be in (0, pi)")


@dataclass(eq=False)
class ReflectorObject:
    """Rigid cluster of PEC rectangles rotated about a shared pivot."""

    rectangles: list
    pivot: Vec3
    rotation: tuple = (0.0, 0.0, 0.0)  # last applied (yaw, pitch, roll)

    def __post_init__(self):
        self.pivot = np.asarray(self.pivot, dtype=float)


def rotate_object(obj: ReflectorObject, angles) -> ReflectorObject:
    """Rigidly rotate all rectangles about the pivot by intrinsic z-y-x angles."""
    yaw, pitch, roll = (float(a) for a in angles)
    if not np.all(np.isfinite([yaw, pitch, roll])):
        raise ValueError("rotation angles must be finite")
    rot = rotation_zyx(yaw, pitch, roll)
    rects = []
    for r in obj.rectangles:
        rects.append(
            Rectangle(
                r.ident,
                obj.pivot + rot @ (r.center - obj.pivot),
                rot @ r.normal,
                rot @ r.u,
                rot @ r.v,
                r.hu,
                r.hv,
                r.material,
                r.color,
            )
        )
    return ReflectorObject(rects, obj.pivot.copy(), (yaw, pitch, roll))


@dataclass(eq=False)
class RoomScene:
    walls: list = field(default_factory=list)  # Rectangle (absorber/pec)
    tiles: list = field(default_factory=list)  # tiles.SdmTile
    objects: list = field(default_factory=list)  # ReflectorObject
    sources: list = field(default_factory=list)  # PointSource
    arrays: list = field(default_factory=list)  # ReceiveArray
    cameras: dict = field(default_factory=dict)  # name -> Camera ("L"/"R")
    endpoints: dict = field(default_factory=dict)  # name -> Vec3 reference point
    injected: list = field(default_factory=list)  # propagation.PatchGroup emitters

    def all_rectangles(self):
        rects = list(self.walls)
        for t in self.tiles:
            rects.append(t.rect)
        for o in self.objects:
            rects.extend(o.rectangles)
        return rects

    def endpoint_points(self) -> dict:
        """Named reference points: tiles excluded (they are graph nodes themselves)."""
        pts = {}
        for i, o in enumerate(self.objects):
            pts[f"obj{i}"] = o.pivot
        for i, a in enumerate(self.arrays):
            pts[f"arr{i}"] = a.center
        for i, s in enumerate(self.sources):
            pts[f"src{i}"] = s.position
        pts.update({k: np.asarray(v, float) for k, v in self.endpoints.items()})
        return pts

    def copy(self) -> "RoomScene":
        return copy.deepcopy(self)


def validate_scene(scene: RoomScene):
    """Check id uniqueness and rectangle interpenetration beyond 1e-9 m."""
    rects = scene.all_rectangles()
    ids = [r.ident for r in rects]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise SceneValidationError(f"duplicate rectangle ids: {dupes}")
    for i in range(len(rects)):
        for j in range(i + 1, len(rects)):
            if _interpenetrates(rects[i], rects[j]):
                raise SceneValidationError(
                    f"rectangles {rects[i].ident} and {rects[j].ident} interpenetrate"
                )


def _interpenetrates(a: Rectangle, b: Rectangle, tol: float = GRAZE_TOL) -> bool:
    # Corners of a strictly on both sides of b's plane, and the crossing
    # segment passing through b's interior (and vice versa).
    return _crosses_interior(a, b, tol) and _crosses_interior(b, a, tol)


def _crosses_interior(a: Rectangle, b: Rectangle, tol: float) -> bool:
    corners = a.corners()
    d = (corners - b.center) @ b.normal
    if d.min() > -tol or d.max() < tol:
        return False  # does not cross b's plane
    # Intersection segment of a's boundary+interior with b's plane: collect the
    # edge crossing points and test whether any lies inside b's bounds.
    pts = []
    for k in range(4):
        p, q = corners[k], corners[(k + 1) % 4]
        dp, dq = d[k], d[(k + 1) % 4]
        if (dp < -tol and dq > tol) or (dp > tol and dq < -tol):
            t = dp / (dp - dq)
            pts.append(p + t * (q - p))
    if len(pts) < 2:
        return False
    p0, p1 = pts[0], pts[-1]
    # Sample along the chord; inside-test against b's in-plane bounds.
    for t in np.linspace(0.0, 1.0, 9):
        x = p0 + t * (p1 - p0)
        rel = x - b.center
        if abs(rel @ b.u) < b.hu - tol and abs(rel @ b.v) < b.hv - tol:
            return True
    return False


def los_visible(p, q, scene: RoomScene, exclude=()) -> bool:
    """True iff the open segment pq meets no scene rectangle outside `exclude`.

    Grazing hits within 1e-9 m of a rectangle edge count as blocked.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = q - p
    seg_len = np.linalg.norm(d)
    if seg_len < 1e-15:
        raise ValueError("los_visible requires distinct endpoints")
    t_eps = GRAZE_TOL / seg_len
    for r in scene.all_rectangles():
        if r.ident in exclude:
            continue
        denom = np.dot(r.normal, d)
        if abs(denom) < 1e-15 * seg_len:
            continue  # parallel to the plane
        t = np.dot(r.normal, r.center - p) / denom
        if t <= t_eps or t >= 1.0 - t_eps:
            continue
        x = p + t * d - r.center
        if abs(np.dot(x, r.u)) <= r.hu + GRAZE_TOL and abs(np.dot(x, r.v)) <= r.hv + GRAZE_TOL:
            return False
    return True


# ---------------- reference-photo rasterization ----------------


def rasterize_view(scene: RoomScene, cam: Camera) -> np.ndarray:
    """Pinhole render of the reflector rectangles, painter's algorithm, flat palette.

    Returns an (H, W, 3) uint8 image; background is white.
    """
    fwd = cam.look_at - cam.position
    if np.linalg.norm(fwd) < 1e-12:
        raise DegenerateCameraError("camera look-at coincides with its position")
    fwd = unit(fwd)
    right = unit(np.cross(fwd, cam.up))
    up_cam = np.cross(right, fwd)
    tan_h = np.tan(cam.hfov / 2.0)
    tan_v = tan_h * cam.height / cam.width
    img = np.full((cam.height, cam.width, 3), 255, dtype=np.uint8)

    rects = [r for o in scene.objects for r in o.rectangles]
    order = sorted(rects, key=lambda r: -np.linalg.norm(r.center - cam.position))

    cols = (np.arange(cam.width) + 0.5) / cam.width * 2.0 - 1.0
    rows = 1.0 - (np.arange(cam.height) + 0.5) / cam.height * 2.0
    px, py = np.meshgrid(cols, rows)  # normalized image plane coords

    for r in order:
        poly = _clip_near(r.corners(), cam.position, fwd, z_near=1e-3)
        if len(poly) < 3:
            continue
        rel = poly - cam.position
        z = rel @ fwd
        x = (rel @ right) / (z * tan_h)
        y = (rel @ up_cam) / (z * tan_v)
        verts = np.stack([x, y], axis=1)
        mask = _fill_convex(verts, px, py)
        if mask.any():
            img[mask] = PALETTE[r.color % len(PALETTE)]
    return img


def _clip_near(points: np.ndarray, origin: Vec3, fwd: Vec3, z_near: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon against the plane z = z_near."""
    out = []
    z = (points - origin) @ fwd
    n = len(points)
    for i in range(n):
        p, q = points[i], points[(i + 1) % n]
        zp, zq = z[i], z[(i + 1) % n]
        if zp >= z_near:
            out.append(p)
        if (zp >= z_near) != (zq >= z_near):
            t = (z_near - zp) / (zq - zp)
            out.append(p + t * (q - p))
    return np.asarray(out) if out else np.empty((0, 3))


def _fill_convex(verts: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Pixel-center coverage mask of a convex polygon in normalized coords."""
    n = len(verts)
    signs = None
    inside = np.ones(px.shape, dtype=bool)
    pos = np.zeros(px.shape, dtype=bool)
    neg = np.zeros(px.shape, dtype=bool)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        pos |= cross > 0
        neg |= cross < 0
    inside = ~(pos & neg)
    # Restrict to the polygon's bounding box to avoid marking the whole plane
    # when the polygon is degenerate.
    xmin, xmax = verts[:, 0].min(), verts[:, 0].max()
    ymin, ymax = verts[:, 1].min(), verts[:, 1].max()
    inside &= (px >= xmin) & (px <= xmax) & (py >= ymin) & (py <= ymax)
    return inside


# ---------------- JSON scene files ----------------


def scene_to_dict(scene: RoomScene) -> dict:
    def rect_d(r):
        return {
            "id": r.ident,
            "center": r.center.tolist(),
            "normal": r.normal.tolist(),
            "u": r.u.tolist(),
            "v": r.v.tolist(),
            "hu": r.hu,
            "hv": r.hv,
            "material": r.material,
            "color": r.color,
        }

    return {
        "walls": [rect_d(r) for r in scene.walls],
        "tiles": [
            {
                "id": t.ident,
                "rect": rect_d(t.rect),
                "rows": t.rows,
                "cols": t.cols,
                "pitch": t.pitch,
                "codebook": t.codebook_id,
            }
            for t in scene.tiles
        ],
        "objects": [
            {
                "pivot": o.pivot.tolist(),
                "rotation": list(o.rotation),
                "rectangles": [rect_d(r) for r in o.rectangles],
            }
            for o in scene.objects
        ],
        "sources": [
            {
                "position": s.position.tolist(),
                "amplitude": [s.amplitude.real, s.amplitude.imag],
                "frequency": s.frequency,
            }
            for s in scene.sources
        ],
        "arrays": [
            {"positions": a.positions.tolist(), "rows": a.rows, "cols": a.cols}
            for a in scene.arrays
        ],
        "cameras": {
            name: {
                "position": c.position.tolist(),
                "look_at": c.look_at.tolist(),
                "up": c.up.tolist(),
                "hfov": c.hfov,
                "width": c.width,
                "height": c.height,
            }
            for name, c in scene.cameras.items()
        },
        "endpoints": {k: np.asarray(v, float).tolist() for k, v in scene.endpoints.items()},
    }


def scene_from_dict(data: dict) -> RoomScene:
    from .tiles import SdmTile  # deferred: tiles imports Rectangle from here

    def rect_p(d):
        return Rectangle(
            d["id"],
            vec(*d["center"]),
            vec(*d["normal"]),
            vec(*d["u"]),
            vec(*d["v"]),
            float(d["hu"]),
            float(d["hv"]),
            d.get("material", "pec"),
            int(d.get("color", 0)),
        )

    scene = RoomScene()
    scene.walls = [rect_p(d) for d in data.get("walls", [])]
    for d in data.get("tiles", []):
        scene.tiles.append(
            SdmTile(
                ident=d["id"],
                rect=rect_p(d["rect"]),
                rows=int(d["rows"]),
                cols=int(d["cols"]),
                pitch=float(d["pitch"]),
                codebook_id=d.get("codebook", "default"),
            )
        )
    for d in data.get("objects", []):
        scene.objects.append(
            ReflectorObject(
                [rect_p(r) for r in d["rectangles"]],
                vec(*d["pivot"]),
                tuple(d.get("rotation", (0.0, 0.0, 0.0))),
            )
        )
    for d in data.get("sources", []):
        amp = d.get("amplitude", [1.0, 0.0])
        scene.sources.append(
            PointSource(vec(*d["position"]), complex(amp[0], amp[1]), float(d.get("frequency", 5e9)))
        )
    for d in data.get("arrays", []):
        scene.arrays.append(ReceiveArray(np.array(d["positions"]), int(d["rows"]), int(d["cols"])))
    for name, d in data.get("cameras", {}).items():
        scene.cameras[name] = Camera(
            vec(*d["position"]),
            vec(*d["look_at"]),
            vec(*d["up"]),
            float(d["hfov"]),
            int(d.get("width", 64)),
            int(d.get("height", 64)),
        )
    scene.endpoints = {k: vec(*v) for k, v in data.get("endpoints", {}).items()}
    return scene


def save_scene(scene: RoomScene, path):
    with open(path, "w") as f:
        json.dump(scene_to_dict(scene), f, indent=1, sort_keys=True)


def load_scene(path) -> RoomScene:
    with open(path) as f:
        return scene_from_dict(json.load(f))


def scene_hash(scene: RoomScene) -> str:
    """sha256 of the canonical JSON serialization."""
    blob = json.dumps(scene_to_dict(scene), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
