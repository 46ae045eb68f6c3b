"""Forward Gaussian-splat rasterizer.

The compositing kernel comes from the compiled ``_raster`` extension when it
is importable and from the NumPy twin otherwise. Set
``SPLATGEN_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..camera import Camera
from ..kinematics import DeformedGaussians
from . import _raster_py
from .binning import MAX_TILE_ENTRIES, RenderResourceError, bin_splats, depth_order
from .project import CUTOFF_SIGMA, EPS_COV, Splats2D, clamp_cov2d, project_gaussian, project_gaussians

_compiled = None
if os.environ.get("SPLATGEN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _raster as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"

__all__ = [
    "BACKEND", "RenderOutput", "RenderResourceError", "RenderSettings", "Splats2D",
    "available_backends", "clamp_cov2d", "project_gaussian", "project_gaussians", "render",
    "render_splats",
]


@dataclass(frozen=True)
class RenderSettings:
    tile_size: int = 16
    t_min: float = 1e-4
    alpha_max: float = 0.99
    cutoff_sigma: float = CUTOFF_SIGMA
    eps_cov: float = EPS_COV
    max_tile_entries: int = MAX_TILE_ENTRIES

    @classmethod
    def from_dict(cls, d: dict | None) -> "RenderSettings":
        d = d or {}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown render settings: {sorted(unknown)}")
        return cls(**{k: type(getattr(cls, k))(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True, eq=False)
class RenderOutput:
    """Premultiplied color and coverage; ``rgb <= alpha`` channel-wise."""

    rgb: np.ndarray    # (H, W, 3)
    alpha: np.ndarray  # (H, W)

    def unpremultiplied(self) -> np.ndarray:
        a = self.alpha[..., None]
        return np.divide(self.rgb, a, out=np.zeros_like(self.rgb), where=a > 0)

    def save_debug_png(self, rgb_path, alpha_path) -> None:
        from PIL import Image

        Image.fromarray(to_uint8(self.rgb)).save(rgb_path)
        Image.fromarray(to_uint8(self.alpha), mode="L").save(alpha_path)


def to_uint8(img) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def available_backends() -> list[str]:
    return (["cython"] if _compiled is not None else []) + ["python"]


def _kernels(backend: str | None):
    """(projection kernel or None for NumPy, compositing kernel)."""
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled raster extension is not built")
        return _compiled.project_geometry, _compiled.composite_tiles
    if backend == "python":
        return None, _raster_py.composite_tiles
    raise ValueError(f"unknown backend {backend!r}")


def render_splats(splats: Splats2D, width: int, height: int,
                  settings: RenderSettings = RenderSettings(), backend: str | None = None,
                  num_threads: int = 0) -> RenderOutput:
    if width <= 0 or height <= 0:
        raise ValueError("cannot render a zero-area image")
    order = depth_order(splats.depths, splats.index)
    offsets, entries = bin_splats(splats.means, splats.extents, order, width, height,
                                  settings.tile_size, settings.max_tile_entries)
    rgb, alpha = _kernels(backend)[1](
        splats.means, splats.conics, splats.colors, splats.opacities, splats.extents,
        offsets, entries,
        width, height, settings.tile_size, settings.t_min, settings.alpha_max,
        settings.cutoff_sigma, num_threads)
    return RenderOutput(rgb, alpha)


def render(gaussians: DeformedGaussians, camera: Camera,
           settings: RenderSettings = RenderSettings(), backend: str | None = None,
           num_threads: int = 0) -> RenderOutput:
    """Rasterize posed Gaussians with front-to-back alpha compositing.

    Output is bit-identical for any ``tile_size`` and ``num_threads``: each
    pixel walks the same depth-sorted list, tiles only prune splats whose
    cutoff footprint cannot reach it.
    """
    if camera.width <= 0 or camera.height <= 0:
        raise ValueError("cannot render a zero-area image")
    splats = project_gaussians(gaussians.centroids, gaussians.covariances, gaussians.opacities,
                               gaussians.features, camera, settings.eps_cov, settings.cutoff_sigma,
                               _kernels(backend)[0])
    return render_splats(splats, camera.width, camera.height, settings, backend, num_threads)
