"""Quaternion and rigid-transform helpers.

Quaternions are Hamilton convention, stored w-first as ``(w, x, y, z)``.
"""

from __future__ import annotations

import numpy as np

UNIT_TOL = 1e-6


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix for one quaternion ``(4,)`` or a stack ``(..., 4)``.

    The quaternion is used as given (no renormalization); callers validate
    unit length.
    """
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (3, 3))
    out[..., 0, 0] = 1 - 2 * (y * y + z * z)
    out[..., 0, 1] = 2 * (x * y - w * z)
    out[..., 0, 2] = 2 * (x * z + w * y)
    out[..., 1, 0] = 2 * (x * y + w * z)
    out[..., 1, 1] = 1 - 2 * (x * x + z * z)
    out[..., 1, 2] = 2 * (y * z - w * x)
    out[..., 2, 0] = 2 * (x * z - w * y)
    out[..., 2, 1] = 2 * (y * z + w * x)
    out[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    h = 0.5 * angle
    return np.concatenate([[np.cos(h)], np.sin(h) * axis])


def quat_multiply(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def random_unit_quaternions(rng: np.random.Generator, n: int) -> np.ndarray:
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    return q


def is_unit(q, tol: float = UNIT_TOL) -> np.ndarray:
    return np.abs(np.linalg.norm(np.asarray(q, dtype=np.float64), axis=-1) - 1.0) <= tol


def rigid(rotation, translation) -> np.ndarray:
    """4x4 homogeneous matrix from a 3x3 rotation and a translation."""
    m = np.eye(4)
    m[:3, :3] = rotation
    m[:3, 3] = translation
    return m


def translation(t) -> np.ndarray:
    return rigid(np.eye(3), t)


def covariance_from_scale_rotation(scales, quats) -> np.ndarray:
    """Sigma = R S S^T R^T for stacks of scales ``(N, 3)`` and quaternions ``(N, 4)``."""
    r = quat_to_matrix(quats)
    m = r * np.asarray(scales, dtype=np.float64)[:, None, :]
    return m @ m.transpose(0, 2, 1)


def is_rigid(m, tol: float = 1e-5) -> bool:
    m = np.asarray(m)
    r = m[:3, :3]
    return (np.allclose(r @ r.T, np.eye(3), atol=tol)
            and np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=0.0))
