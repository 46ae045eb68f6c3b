"""Foreground/background blending and image-aligned keypoints."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assets import N_KEYPOINTS, Skeleton
from .camera import Camera, project_points
from .kinematics import JointTransforms
from .render import RenderOutput

ABSENT, OCCLUDED, VISIBLE = 0, 1, 2


class CompositionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BackgroundImage:
    rgb: np.ndarray  # (H, W, 3) in [0, 1]
    source_id: str = ""


def load_background(path, width: int, height: int) -> BackgroundImage:
    """Read an image and bilinearly resample it to the render size."""
    from PIL import Image

    path = Path(path)
    with Image.open(path) as im:
        im = im.convert("RGB")
        if im.size != (width, height):
            im = im.resize((width, height), Image.BILINEAR)
        rgb = np.asarray(im, dtype=np.float64) / 255.0
    return BackgroundImage(rgb, path.stem)


@dataclass(frozen=True, eq=False)
class KeypointSet:
    """23 COCO-WB body+foot keypoints: pixel coordinates and visibility flags."""

    xy: np.ndarray          # (23, 2)
    visibility: np.ndarray  # (23,) int in {0, 1, 2}

    def __post_init__(self):
        if self.xy.shape != (N_KEYPOINTS, 2) or self.visibility.shape != (N_KEYPOINTS,):
            raise CompositionError(f"keypoint set must have {N_KEYPOINTS} entries")

    @classmethod
    def from_array(cls, arr) -> "KeypointSet":
        a = np.asarray(arr, dtype=np.float64).reshape(N_KEYPOINTS, 3)
        return cls(a[:, :2].copy(), a[:, 2].astype(np.int64))

    def to_array(self) -> np.ndarray:
        return np.column_stack([self.xy, self.visibility.astype(np.float64)])

    def to_flat(self) -> list[float]:
        """COCO ``[x1, y1, v1, x2, ...]`` with absent points zeroed."""
        a = self.to_array()
        a[self.visibility == ABSENT, :2] = 0.0
        return [float(v) if i % 3 != 2 else int(v) for i, v in enumerate(a.ravel())]


def composite(render: RenderOutput, bg: BackgroundImage) -> np.ndarray:
    """Blend the premultiplied render over the background.

    ``render.rgb`` already holds foreground times coverage, so this equals
    ``fg * M + bg * (1 - M)`` for the unpremultiplied foreground ``fg``.
    """
    if render.rgb.shape != bg.rgb.shape:
        raise CompositionError(f"render {render.rgb.shape} vs background {bg.rgb.shape}")
    m = render.alpha[..., None]
    return np.clip(render.rgb + bg.rgb * (1.0 - m), 0.0, 1.0)


def composite_straight(foreground, mask, background) -> np.ndarray:
    """``foreground * mask + background * (1 - mask)`` for an unpremultiplied foreground."""
    fg = np.asarray(foreground, dtype=np.float64)
    bg = np.asarray(background, dtype=np.float64)
    m = np.asarray(mask, dtype=np.float64)
    if fg.shape != bg.shape or m.shape != fg.shape[:2]:
        raise CompositionError(f"shape mismatch: fg {fg.shape}, mask {m.shape}, bg {bg.shape}")
    m = m[..., None]
    return np.clip(fg * m + bg * (1.0 - m), 0.0, 1.0)


def transform_keypoints(kps: KeypointSet, old_pp, render_res: float, new_dims,
                        isotropic: bool = False) -> KeypointSet:
    """Recenter on the old principal point, rescale, and place in the new frame.

    ``x' = (x - cx_old) * r / w_new + w_new / 2`` and likewise for ``y`` with
    ``h_new``. With ``isotropic=True`` both axes use ``r / w_new``.
    """
    w_new, h_new = (float(v) for v in new_dims)
    if w_new <= 0 or h_new <= 0 or render_res <= 0:
        raise CompositionError("render_res and new dimensions must be positive")
    cx, cy = (float(v) for v in old_pp)
    sx = render_res / w_new
    sy = sx if isotropic else render_res / h_new
    xy = np.empty_like(kps.xy, dtype=np.float64)
    xy[:, 0] = (kps.xy[:, 0] - cx) * sx + w_new / 2
    xy[:, 1] = (kps.xy[:, 1] - cy) * sy + h_new / 2
    return KeypointSet(xy, kps.visibility.copy())


def project_joint_keypoints(transforms: JointTransforms, skeleton: Skeleton,
                            camera: Camera) -> tuple[KeypointSet, np.ndarray]:
    """Project posed joints through the keypoint map.

    Joints in front of the camera and on the image are VISIBLE; everything
    else is ABSENT with zeroed coordinates. No self-occlusion reasoning.
    Returns the keypoints and their 3D positions (m, world).
    """
    joints3d = transforms.joints[np.asarray(skeleton.keypoint_map)]
    uv, _, front = project_points(camera, joints3d)
    on_image = front & (uv[:, 0] >= 0) & (uv[:, 0] <= camera.width - 1) \
        & (uv[:, 1] >= 0) & (uv[:, 1] <= camera.height - 1)
    xy = np.where(on_image[:, None], uv, 0.0)
    vis = np.where(on_image, VISIBLE, ABSENT).astype(np.int64)
    return KeypointSet(xy, vis), joints3d


def bbox_from_alpha(alpha, threshold: float = 0.5, pad: float = 0.05):
    """Tight ``(x, y, w, h)`` box around ``alpha > threshold``, grown by ``pad`` and clamped.

    The box spans whole pixels; ``pad`` is the total relative growth of each
    side length. Returns ``None`` when no pixel passes.
    """
    a = np.asarray(alpha)
    rows = np.flatnonzero(np.any(a > threshold, axis=1))
    cols = np.flatnonzero(np.any(a > threshold, axis=0))
    if rows.size == 0:
        return None
    h_img, w_img = a.shape
    x0, x1 = float(cols[0]), float(cols[-1] + 1)
    y0, y1 = float(rows[0]), float(rows[-1] + 1)
    gx, gy = 0.5 * pad * (x1 - x0), 0.5 * pad * (y1 - y0)
    x0, x1 = max(0.0, x0 - gx), min(float(w_img), x1 + gx)
    y0, y1 = max(0.0, y0 - gy), min(float(h_img), y1 + gy)
    return (x0, y0, x1 - x0, y1 - y0)


def bbox_from_keypoints(kps: KeypointSet, width: int, height: int, pad: float = 0.05):
    vis = kps.visibility > 0
    if not vis.any():
        return (0.0, 0.0, 0.0, 0.0)
    lo, hi = kps.xy[vis].min(axis=0), kps.xy[vis].max(axis=0)
    g = 0.5 * pad * (hi - lo)
    lo = np.maximum(lo - g, 0.0)
    hi = np.minimum(hi + g, [width, height])
    return (float(lo[0]), float(lo[1]), float(hi[0] - lo[0]), float(hi[1] - lo[1]))
