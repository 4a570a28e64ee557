"""Small vector helpers used by the scene and propagation modules.

All positions and directions are float64 numpy arrays of shape (3,), in
meters. Euler rotations follow the intrinsic z-y-x order (yaw about z,
then pitch about the new y, then roll about the new x).
"""

import numpy as np

Vec3 = np.ndarray


def vec(x, y, z) -> Vec3:
    return np.array([x, y, z], dtype=float)


def norm(v) -> float:
    return float(np.linalg.norm(v))


def unit(v) -> Vec3:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < 1e-15:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def rotation_zyx(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Rotation matrix for intrinsic z-y-x Euler angles: R = Rz @ Ry @ Rx."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


def orthonormal_frame(normal: Vec3) -> tuple[Vec3, Vec3]:
    """In-plane unit axes (u, v) completing `normal` to a right-handed frame."""
    n = unit(normal)
    helper = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(n, helper)) > 0.9:
        helper = np.array([1.0, 0.0, 0.0])
    u = unit(np.cross(helper, n))
    v = np.cross(n, u)
    return u, v
