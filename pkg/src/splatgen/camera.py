"""Pinhole cameras and per-sequence orbit sampling.

Conventions: right-handed world with +y up; camera space looks down +z with
+x right and +y down in the image; pixel origin at the top-left corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng

Z_NEAR = 1e-3


class CameraError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray     # (3, 3) world -> camera
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise CameraError("focal lengths must be positive")
        if not (self.width > 0 and self.height > 0):
            raise CameraError("image dimensions must be positive")

    def __eq__(self, other):
        if not isinstance(other, Camera):
            return NotImplemented
        return (self.intrinsics() == other.intrinsics()
                and np.array_equal(self.rotation, other.rotation)
                and np.array_equal(self.translation, other.translation))

    def intrinsics(self) -> tuple:
        return (self.fx, self.fy, self.cx, self.cy, self.width, self.height)

    @property
    def center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    def world_to_camera(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
            "rotation": np.asarray(self.rotation, dtype=np.float64).tolist(),
            "translation": np.asarray(self.translation, dtype=np.float64).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        if "intrinsic" in d:
            k = np.asarray(d["intrinsic"], dtype=np.float64)
            fx, fy, cx, cy = k[0, 0], k[1, 1], k[0, 2], k[1, 2]
        else:
            fx, fy, cx, cy = d["fx"], d["fy"], d["cx"], d["cy"]
        if "extrinsic" in d:
            e = np.asarray(d["extrinsic"], dtype=np.float64)
            r, t = e[:3, :3], e[:3, 3]
        else:
            r = np.asarray(d["rotation"], dtype=np.float64)
            t = np.asarray(d["translation"], dtype=np.float64)
        return cls(float(fx), float(fy), float(cx), float(cy), int(d["width"]), int(d["height"]),
                   r.reshape(3, 3), t.reshape(3))

    def resized(self, width: int, height: int) -> "Camera":
        sx, sy = width / self.width, height / self.height
        return Camera(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy, width, height,
                      self.rotation, self.translation)


def look_at_camera(position, target, fx: float, fy: float, width: int, height: int,
                   cx: float | None = None, cy: float | None = None, up=(0.0, 1.0, 0.0)) -> Camera:
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - position
    dist = np.linalg.norm(fwd)
    if dist < 1e-12:
        raise CameraError("camera position coincides with the look-at point")
    fwd = fwd / dist
    right = np.cross(fwd, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-9:
        # Looking straight along the up axis; fall back to world +z as the reference.
        right = np.cross(fwd, [0.0, 0.0, 1.0])
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    r = np.stack([right, down, fwd])
    t = -r @ position
    return Camera(float(fx), float(fy), width / 2.0 if cx is None else cx,
                  height / 2.0 if cy is None else cy, int(width), int(height), r, t)


def project(camera: Camera, point):
    """Pixel coordinates and depth of a world point, or ``None`` when culled."""
    pc = camera.world_to_camera(point)
    z = pc[2]
    if not z > Z_NEAR:
        return None
    u = camera.fx * pc[0] / z + camera.cx
    v = camera.fy * pc[1] / z + camera.cy
    return np.array([u, v]), float(z)


def project_points(camera: Camera, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ``project``: (uv (N, 2), depth (N,), valid mask (N,))."""
    pc = camera.world_to_camera(np.asarray(points, dtype=np.float64).reshape(-1, 3))
    z = pc[:, 2]
    valid = z > Z_NEAR
    zs = np.where(valid, z, 1.0)
    uv = np.stack([camera.fx * pc[:, 0] / zs + camera.cx, camera.fy * pc[:, 1] / zs + camera.cy], axis=1)
    uv[~valid] = np.nan
    return uv, z, valid


@dataclass(frozen=True)
class OrbitSpec:
    """Camera placement distribution around a subject.

    The default angle ranges are engine choices, not values from any
    published dataset.
    """

    elevation_deg: tuple[float, float] = (-10.0, 30.0)
    azimuth_deg: tuple[float, float] = (0.0, 360.0)
    radius_m: tuple[float, float] = (3.0, 4.5)
    look_at: tuple[float, float, float] = (0.0, 0.9, 0.0)
    seed: int = 0
    width: int = 256
    height: int = 256
    fov_deg: float = 50.0
    frame_jitter_deg: float = 0.0

    def validate(self) -> None:
        for name in ("elevation_deg", "azimuth_deg", "radius_m"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise CameraError(f"{name} must be a non-empty interval, got [{lo}, {hi}]")
        if self.radius_m[0] <= 0:
            raise CameraError("radius must be positive")
        if not 0 < self.fov_deg < 180:
            raise CameraError("fov_deg must lie in (0, 180)")
        if self.width <= 0 or self.height <= 0:
            raise CameraError("image dimensions must be positive")

    @property
    def focal(self) -> float:
        return 0.5 * self.height / math.tan(math.radians(self.fov_deg) / 2)

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "OrbitSpec":
        d = {**d, **overrides}
        kw = {}
        for name in ("elevation_deg", "azimuth_deg", "radius_m"):
            if name in d:
                kw[name] = tuple(float(v) for v in d[name])
        if "look_at" in d:
            kw["look_at"] = tuple(float(v) for v in d["look_at"])
        for name, typ in (("seed", int), ("width", int), ("height", int),
                          ("fov_deg", float), ("frame_jitter_deg", float)):
            if name in d:
                kw[name] = typ(d[name])
        spec = cls(**kw)
        spec.validate()
        return spec

    def to_dict(self) -> dict:
        return {
            "elevation_deg": list(self.elevation_deg), "azimuth_deg": list(self.azimuth_deg),
            "radius_m": list(self.radius_m), "look_at": list(self.look_at), "seed": self.seed,
            "width": self.width, "height": self.height, "fov_deg": self.fov_deg,
            "frame_jitter_deg": self.frame_jitter_deg,
        }


def orbit_position(look_at, elevation_deg: float, azimuth_deg: float, radius: float) -> np.ndarray:
    el, az = math.radians(elevation_deg), math.radians(azimuth_deg)
    offset = radius * np.array([math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)])
    return np.asarray(look_at, dtype=np.float64) + offset


def sample_orbit(spec: OrbitSpec, sequence_index: int) -> tuple[float, float, float]:
    """(elevation deg, azimuth deg, radius m) for one sequence."""
    s = spec.seed
    el = rng.uniform_range(*spec.elevation_deg, s, rng.STREAM_CAMERA, sequence_index, 0)
    az = rng.uniform_range(*spec.azimuth_deg, s, rng.STREAM_CAMERA, sequence_index, 1)
    r = rng.uniform_range(*spec.radius_m, s, rng.STREAM_CAMERA, sequence_index, 2)
    return el, az, r


def sample_camera(spec: OrbitSpec, sequence_index: int, frame_index: int | None = None) -> Camera:
    """The camera for one sequence; optional per-frame jitter when enabled in ``spec``."""
    spec.validate()
    el, az, r = sample_orbit(spec, sequence_index)
    if frame_index is not None and spec.frame_jitter_deg > 0:
        j = spec.frame_jitter_deg
        el += rng.uniform_range(-j, j, spec.seed, rng.STREAM_JITTER, sequence_index, frame_index, 0)
        az += rng.uniform_range(-j, j, spec.seed, rng.STREAM_JITTER, sequence_index, frame_index, 1)
    pos = orbit_position(spec.look_at, el, az, r)
    f = spec.focal
    return look_at_camera(pos, spec.look_at, f, f, spec.width, spec.height)
