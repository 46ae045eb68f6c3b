"""Real spherical-harmonic color evaluation up to degree 3."""

from __future__ import annotations

import numpy as np

C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
      -1.0925484305920792, 0.5462742152960396)
C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
      -0.4570457994644658, 1.445305721320277, -0.5900435899266435)


class SHError(ValueError):
    pass


def degree_from_count(k: int) -> int:
    d = int(round(np.sqrt(k))) - 1
    if d < 0 or d > 3 or (d + 1) ** 2 != k:
        raise SHError(f"{k} coefficients is not (deg+1)^2 for deg in 0..3")
    return d


def sh_basis(dirs, degree: int) -> np.ndarray:
    """Basis values ``(N, (degree+1)^2)`` for unit directions ``(N, 3)``."""
    d = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    x, y, z = d[:, 0], d[:, 1], d[:, 2]
    cols = [np.full_like(x, C0)]
    if degree > 0:
        cols += [-C1 * y, C1 * z, -C1 * x]
    if degree > 1:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        cols += [C2[0] * xy, C2[1] * yz, C2[2] * (2 * zz - xx - yy), C2[3] * xz, C2[4] * (xx - yy)]
    if degree > 2:
        cols += [
            C3[0] * y * (3 * xx - yy),
            C3[1] * xy * z,
            C3[2] * y * (4 * zz - xx - yy),
            C3[3] * z * (2 * zz - 3 * xx - 3 * yy),
            C3[4] * x * (4 * zz - xx - yy),
            C3[5] * z * (xx - yy),
            C3[6] * x * (xx - 3 * yy),
        ]
    return np.stack(cols, axis=1)


def eval_sh_batch(features, dirs) -> np.ndarray:
    """Clamped RGB for features ``(N, K, 3)`` viewed along ``dirs`` ``(N, 3)``."""
    f = np.asarray(features, dtype=np.float64)
    deg = degree_from_count(f.shape[1])
    basis = sh_basis(dirs, deg)
    rgb = np.einsum("nk,nkc->nc", basis, f) + 0.5
    return np.clip(rgb, 0.0, 1.0)


def eval_sh(features, view_dir) -> np.ndarray:
    """RGB in [0, 1] for one SH block ``(K, 3)`` (or flat ``3K``) and a unit view direction."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 1:
        if f.size % 3:
            raise SHError(f"flat SH block of length {f.size} is not a multiple of 3")
        f = f.reshape(-1, 3)
    degree_from_count(f.shape[0])
    v = np.asarray(view_dir, dtype=np.float64)
    if abs(np.linalg.norm(v) - 1.0) > 1e-4:
        raise SHError("view_dir must be unit length")
    return eval_sh_batch(f[None], v[None])[0]
