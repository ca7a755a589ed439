"""
Rotation conversions for the angle-error protocol.

Euler angles use the intrinsic Z-Y-X convention, R = Rz(z) @ Ry(y) @ Rx(x),
and are returned in (z, y, x) order. All functions broadcast over leading
axes: vectors are [..., 3] and matrices [..., 3, 3].
"""

import numpy as np

from errors import RotationError

SMALL_ANGLE = 1e-12
GIMBAL_TOLERANCE = 1e-9
ROTATION_TOLERANCE = 1e-6


def _skew(u: np.ndarray) -> np.ndarray:
    x, y, z = u[..., 0], u[..., 1], u[..., 2]
    zero = np.zeros_like(x)
    return np.stack(
        [
            np.stack([zero, -z, y], axis=-1),
            np.stack([z, zero, -x], axis=-1),
            np.stack([-y, x, zero], axis=-1),
        ],
        axis=-2,
    )


def expmap_to_rotmat(v) -> np.ndarray:
    """Rodrigues: R = I + sin(t) K + (1 - cos(t)) K^2 with K the skew matrix of the unit axis."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != 3:
        raise RotationError(f"rotation vectors need a trailing axis of 3, got {v.shape}")
    theta = np.linalg.norm(v, axis=-1)
    small = theta < SMALL_ANGLE
    axis = v / np.where(small, 1.0, theta)[..., None]
    K = _skew(axis)
    sin = np.sin(theta)[..., None, None]
    cos = np.cos(theta)[..., None, None]
    R = np.eye(3) + sin * K + (1.0 - cos) * (K @ K)
    return np.where(small[..., None, None], np.eye(3), R)


def euler_to_rotmat(angles) -> np.ndarray:
    """(z, y, x) -> Rz(z) @ Ry(y) @ Rx(x)."""
    angles = np.asarray(angles, dtype=np.float64)
    z, y, x = angles[..., 0], angles[..., 1], angles[..., 2]
    cz, sz, cy, sy, cx, sx = np.cos(z), np.sin(z), np.cos(y), np.sin(y), np.cos(x), np.sin(x)
    return np.stack(
        [
            np.stack([cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx], axis=-1),
            np.stack([sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx], axis=-1),
            np.stack([-sy, cy * sx, cy * cx], axis=-1),
        ],
        axis=-2,
    )


def check_rotation(R: np.ndarray, tolerance: float = ROTATION_TOLERANCE) -> None:
    if R.shape[-2:] != (3, 3):
        raise RotationError(f"rotation matrices need trailing shape (3, 3), got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise RotationError("rotation matrix has non-finite entries")
    gram = np.swapaxes(R, -1, -2) @ R
    if np.max(np.abs(gram - np.eye(3)), initial=0.0) > tolerance:
        raise RotationError("matrix is not orthonormal")
    if np.max(np.abs(np.linalg.det(R) - 1.0), initial=0.0) > tolerance:
        raise RotationError("matrix is a reflection, not a rotation")


def rotmat_to_euler(R) -> np.ndarray:
    """
    Intrinsic Z-Y-X angles (z, y, x). At gimbal lock (|R[2,0]| >= 1 - 1e-9)
    x is pinned to 0 and z absorbs the remaining rotation about the vertical.
    """
    R = np.asarray(R, dtype=np.float64)
    check_rotation(R)
    r20 = np.clip(R[..., 2, 0], -1.0, 1.0)
    locked = np.abs(r20) >= 1.0 - GIMBAL_TOLERANCE

    y = np.arcsin(-r20)
    z = np.where(
        locked,
        np.arctan2(-R[..., 0, 1], R[..., 1, 1]),
        np.arctan2(R[..., 1, 0], R[..., 0, 0]),
    )
    x = np.where(locked, 0.0, np.arctan2(R[..., 2, 1], R[..., 2, 2]))
    return np.stack([z, y, x], axis=-1)


def expmap_to_euler(v) -> np.ndarray:
    return rotmat_to_euler(expmap_to_rotmat(v))
