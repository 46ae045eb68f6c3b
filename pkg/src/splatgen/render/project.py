"""EWA projection of 3D Gaussians to screen-space splats."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..camera import Z_NEAR, Camera
from ..sh import eval_sh_batch

EPS_COV = 0.3
CUTOFF_SIGMA = 3.0


@dataclass(frozen=True, eq=False)
class Splats2D:
    """Surviving splats after culling; ``index`` points back into the input list."""

    index: np.ndarray      # (M,) int64
    means: np.ndarray      # (M, 2) px
    cov2d: np.ndarray      # (M, 2, 2) px^2
    conics: np.ndarray     # (M, 3) inverse covariance (a, b, c)
    depths: np.ndarray     # (M,)
    colors: np.ndarray     # (M, 3)
    opacities: np.ndarray  # (M,)
    radii: np.ndarray      # (M,) px, cutoff_sigma * sqrt(max eigenvalue)
    extents: np.ndarray    # (M, 2) px, padded half-widths of the cutoff ellipse along x, y

    def __len__(self) -> int:
        return self.index.shape[0]


def clamp_cov2d(cov: np.ndarray, eps: float = EPS_COV) -> tuple[np.ndarray, np.ndarray]:
    """Raise both eigenvalues of each 2x2 SPD matrix to at least ``eps``.

    Matrices already above the floor are returned untouched. Also returns the
    (clamped) largest eigenvalue.
    """
    a, b, c = cov[:, 0, 0], cov[:, 0, 1], cov[:, 1, 1]
    mid = 0.5 * (a + c)
    rad = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b * b, 0.0))
    l1, l2 = mid + rad, mid - rad
    out = cov.copy()
    low = l2 < eps
    if np.any(low):
        l1c = np.maximum(l1[low], eps)
        l2c = np.full_like(l1c, eps)
        bl, al, cl = b[low], a[low], c[low]
        # Leading eigenvector; axis-aligned when the matrix is diagonal.
        vx = np.where(np.abs(bl) > 1e-300, bl, np.where(al >= cl, 1.0, 0.0))
        vy = np.where(np.abs(bl) > 1e-300, l1[low] - al, np.where(al >= cl, 0.0, 1.0))
        norm = np.hypot(vx, vy)
        vx, vy = vx / norm, vy / norm
        d = l1c - l2c
        out[low, 0, 0] = l2c + d * vx * vx
        out[low, 0, 1] = out[low, 1, 0] = d * vx * vy
        out[low, 1, 1] = l2c + d * vy * vy
        l1 = l1.copy()
        l1[low] = l1c
    return out, l1


def project_geometry(centroids, covariances, camera: Camera, eps_cov: float = EPS_COV,
                     cutoff: float = CUTOFF_SIGMA):
    """NumPy twin of the compiled projection kernel.

    Returns ``(valid, means, cov2d, conics, depths, radii, extents)`` with one
    row per input Gaussian.
    """
    p = np.asarray(centroids, dtype=np.float64).reshape(-1, 3)
    sigma = np.asarray(covariances, dtype=np.float64).reshape(-1, 3, 3)
    n = p.shape[0]
    r = camera.rotation
    pc = p @ r.T + camera.translation
    front = pc[:, 2] > Z_NEAR
    x, y = pc[:, 0], pc[:, 1]
    z = np.where(front, pc[:, 2], 1.0)
    means = np.stack([camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy], axis=1)

    jac = np.zeros((n, 2, 3))
    jac[:, 0, 0] = camera.fx / z
    jac[:, 0, 2] = -camera.fx * x / (z * z)
    jac[:, 1, 1] = camera.fy / z
    jac[:, 1, 2] = -camera.fy * y / (z * z)
    t = jac @ r
    cov = (t @ sigma) @ t.transpose(0, 2, 1)
    cov = 0.5 * (cov + cov.transpose(0, 2, 1))
    cov, lmax = clamp_cov2d(cov, eps_cov)
    radii = cutoff * np.sqrt(lmax)
    # Exact ellipse half-widths, padded so pruning by them never drops a pixel
    # the Mahalanobis cutoff would keep.
    extents = cutoff * np.sqrt(np.stack([cov[:, 0, 0], cov[:, 1, 1]], axis=1)) * (1 + 1e-6) + 1e-9
    valid = front & ((means[:, 0] + extents[:, 0] >= 0) & (means[:, 0] - extents[:, 0] <= camera.width - 1)
                     & (means[:, 1] + extents[:, 1] >= 0) & (means[:, 1] - extents[:, 1] <= camera.height - 1))
    det = cov[:, 0, 0] * cov[:, 1, 1] - cov[:, 0, 1] ** 2
    conics = np.stack([cov[:, 1, 1] / det, -cov[:, 0, 1] / det, cov[:, 0, 0] / det], axis=1)
    return valid, means, cov, conics, pc[:, 2], radii, extents


def project_gaussians(centroids, covariances, opacities, features, camera: Camera,
                      eps_cov: float = EPS_COV, cutoff: float = CUTOFF_SIGMA,
                      kernel=None) -> Splats2D:
    """Project and cull a batch of world-space Gaussians.

    A Gaussian is culled when its centroid is not in front of the near plane
    or when its ``cutoff``-sigma screen footprint misses every pixel center.
    Pixel ``(col, row)`` has its center at coordinates ``(col, row)``.
    ``kernel`` swaps in a compiled ``project_geometry``.
    """
    p = np.asarray(centroids, dtype=np.float64).reshape(-1, 3)
    if kernel is None:
        geo = project_geometry(p, covariances, camera, eps_cov, cutoff)
    else:
        geo = kernel(p, covariances, camera.rotation, camera.translation, camera.fx, camera.fy,
                     camera.cx, camera.cy, camera.width, camera.height, Z_NEAR, eps_cov, cutoff)
    keep = np.flatnonzero(geo[0])
    means, cov, conics, depths, radii, extents = (g[keep] for g in geo[1:])

    dirs = p[keep] - camera.center
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 3:
        feats = feats.reshape(feats.shape[0], -1, 3)
    feats = feats[keep]
    colors = eval_sh_batch(feats, dirs) if len(keep) else np.zeros((0, 3))
    ops = np.asarray(opacities, dtype=np.float64).reshape(-1)[keep]
    return Splats2D(keep.astype(np.int64), means, cov, conics, depths, colors, ops, radii, extents)


def project_gaussian(camera: Camera, centroid, covariance, opacity: float, features,
                     eps_cov: float = EPS_COV, cutoff: float = CUTOFF_SIGMA, kernel=None):
    """Single-Gaussian projection; returns a one-element ``Splats2D`` or ``None`` if culled."""
    feats = np.asarray(features, dtype=np.float64).reshape(1, -1, 3)
    s = project_gaussians(np.reshape(centroid, (1, 3)), np.reshape(covariance, (1, 3, 3)),
                          [opacity], feats, camera, eps_cov, cutoff, kernel)
    return s if len(s) else None
