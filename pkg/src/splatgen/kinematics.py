"""Forward kinematics and linear blend skinning of Gaussian clouds."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assets import GaussianAsset, Skeleton
from .camera import Camera
from .geometry import UNIT_TOL, covariance_from_scale_rotation, quat_from_axis_angle, quat_to_matrix

DEFAULT_FPS = 30.0


class PoseError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PoseFrame:
    joint_rotations: np.ndarray            # (J, 4) local, relative to rest
    root_translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    root_rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def identity(cls, n_joints: int) -> "PoseFrame":
        q = np.zeros((n_joints, 4))
        q[:, 0] = 1.0
        return cls(q)

    def validate(self, n_joints: int | None = None) -> None:
        q = np.asarray(self.joint_rotations, dtype=np.float64)
        if q.ndim != 2 or q.shape[1] != 4:
            raise PoseError(f"joint_rotations must be (J, 4), got {q.shape}")
        if n_joints is not None and q.shape[0] != n_joints:
            raise PoseError(f"pose has {q.shape[0]} joints, skeleton has {n_joints}")
        allq = np.vstack([q, np.asarray(self.root_rotation, dtype=np.float64)[None]])
        if not np.all(np.isfinite(allq)) or not np.all(np.isfinite(self.root_translation)):
            raise PoseError("pose contains non-finite values")
        bad = np.flatnonzero(np.abs(np.linalg.norm(allq, axis=1) - 1.0) > UNIT_TOL)
        if bad.size:
            which = "root_rotation" if bad[0] == q.shape[0] else f"joint {bad[0]}"
            raise PoseError(f"non-unit quaternion at {which}")

    def to_dict(self) -> dict:
        return {
            "joint_rotations": np.asarray(self.joint_rotations, dtype=np.float64).tolist(),
            "root_translation": np.asarray(self.root_translation, dtype=np.float64).tolist(),
            "root_rotation": np.asarray(self.root_rotation, dtype=np.float64).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PoseFrame":
        return cls(
            np.asarray(d["joint_rotations"], dtype=np.float64),
            np.asarray(d.get("root_translation", [0.0, 0.0, 0.0]), dtype=np.float64),
            np.asarray(d.get("root_rotation", [1.0, 0.0, 0.0, 0.0]), dtype=np.float64),
        )


@dataclass(frozen=True, eq=False)
class JointTransforms:
    """Per-joint rigid 4x4 maps from canonical to posed space."""

    transforms: np.ndarray   # (J, 4, 4)
    joints: np.ndarray       # (J, 3) posed joint positions

    def __len__(self) -> int:
        return self.transforms.shape[0]


@dataclass(frozen=True, eq=False)
class DeformedGaussians:
    centroids: np.ndarray     # (N, 3) posed
    linear: np.ndarray        # (N, 3, 3) blended linear part A_i
    covariances: np.ndarray   # (N, 3, 3) A_i Sigma_i A_i^T
    opacities: np.ndarray     # (N,)
    features: np.ndarray      # (N, K, 3)
    sh_degree: int = 0

    @property
    def n_gaussians(self) -> int:
        return self.centroids.shape[0]

    @classmethod
    def from_arrays(cls, centroids, covariances, opacities, features, sh_degree=0):
        """Wrap already-posed Gaussians (identity linear part)."""
        centroids = np.asarray(centroids, dtype=np.float64).reshape(-1, 3)
        n = centroids.shape[0]
        return cls(centroids, np.broadcast_to(np.eye(3), (n, 3, 3)).copy(),
                   np.asarray(covariances, dtype=np.float64).reshape(n, 3, 3),
                   np.asarray(opacities, dtype=np.float64).reshape(n),
                   _as_feature_block(features, n), sh_degree)


def _as_feature_block(features, n: int) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    return f if f.ndim == 3 else f.reshape(n, -1, 3)


def forward_kinematics(skeleton: Skeleton, pose: PoseFrame) -> JointTransforms:
    pose.validate(skeleton.n_joints)
    local_r = quat_to_matrix(pose.joint_rotations)
    root = np.eye(4)
    root[:3, :3] = quat_to_matrix(pose.root_rotation)
    root[:3, 3] = pose.root_translation
    world = np.empty((skeleton.n_joints, 4, 4))
    rest = skeleton.rest_positions()
    for i in skeleton.topological_order():
        j = skeleton.joints[i]
        local = np.eye(4)
        local[:3, :3] = local_r[i]
        local[:3, 3] = j.offset
        parent = root if j.parent is None else world[j.parent]
        world[i] = parent @ local
    # Undo the rest placement so T_j acts on canonical coordinates.
    transforms = world.copy()
    transforms[:, :3, 3] -= np.einsum("jab,jb->ja", world[:, :3, :3], rest)
    return JointTransforms(transforms, world[:, :3, 3].copy())


def blended_transforms(asset: GaussianAsset, transforms) -> np.ndarray:
    """Per-Gaussian sum_j w_ij T_j / sum_j w_ij, shape (N, 4, 4)."""
    t = transforms.transforms if isinstance(transforms, JointTransforms) else np.asarray(transforms)
    if t.shape[0] != asset.skeleton.n_joints:
        raise PoseError(f"{t.shape[0]} joint transforms for a {asset.skeleton.n_joints}-joint skeleton")
    w = asset.skin_weights.astype(np.float64)
    m = np.zeros((asset.n_gaussians, 4, 4))
    total = np.zeros(asset.n_gaussians)
    # Slot-by-slot accumulation keeps the sum order fixed.
    for k in range(w.shape[1]):
        m += w[:, k, None, None] * t[asset.skin_joints[:, k]]
        total += w[:, k]
    # Stored weights sum to 1 only to float32 precision; dividing by the same
    # running sum makes the identity pose an exact no-op.
    return m / total[:, None, None]


def lbs_deform(asset: GaussianAsset, transforms) -> DeformedGaussians:
    m = blended_transforms(asset, transforms)
    p = asset.centroids.astype(np.float64)
    a = m[:, :3, :3]
    centroids = (a @ p[:, :, None])[:, :, 0] + m[:, :3, 3]
    cov = covariance_from_scale_rotation(asset.scales, asset.rotations)
    cov = (a @ cov) @ a.transpose(0, 2, 1)
    return DeformedGaussians(centroids, a, cov, asset.opacities.astype(np.float64),
                             asset.features.astype(np.float64), asset.sh_degree)


# ---------------------------------------------------------------- motion files

@dataclass(eq=False)
class MotionSequence:
    frames: list[PoseFrame]
    fps: float = DEFAULT_FPS
    cameras: list[Camera] | None = None
    name: str = "motion"
    extra: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.frames)

    def to_dict(self) -> dict:
        frames = []
        for i, f in enumerate(self.frames):
            d = f.to_dict()
            if self.cameras is not None:
                d["camera"] = self.cameras[i].to_dict()
            frames.append(d)
        out = {"name": self.name, "fps": self.fps, "frames": frames}
        out.update(self.extra)
        return out


def load_motion(path) -> MotionSequence:
    path = Path(path)
    d = json.loads(path.read_text())
    try:
        raw = d["frames"]
        frames = [PoseFrame.from_dict(f) for f in raw]
    except (KeyError, TypeError, ValueError) as e:
        raise PoseError(f"{path}: malformed motion file: {e}") from e
    if not frames:
        raise PoseError(f"{path}: motion has no frames")
    n = frames[0].joint_rotations.shape[0]
    for i, f in enumerate(frames):
        try:
            f.validate(n)
        except PoseError as e:
            raise PoseError(f"{path}: frame {i}: {e}") from e
    cams = None
    if all("camera" in f for f in raw):
        cams = [Camera.from_dict(f["camera"]) for f in raw]
    name = d.get("name") or path.name.removesuffix(".motion.json")
    extra = {k: v for k, v in d.items() if k not in ("frames", "fps", "name")}
    return MotionSequence(frames, float(d.get("fps") or DEFAULT_FPS), cams, name, extra)


def save_motion(motion: MotionSequence, path) -> None:
    Path(path).write_text(json.dumps(motion.to_dict()))


def procedural_motion(skeleton: Skeleton, n_frames: int, seed: int, fps: float = DEFAULT_FPS,
                      amplitude: float = 0.5, name: str = "procedural") -> MotionSequence:
    """Smooth per-joint sinusoidal swings about random axes, for demos and tests."""
    from .rng import derive_seed, STREAM_MOTION

    g = np.random.default_rng(derive_seed(seed, STREAM_MOTION))
    jn = skeleton.n_joints
    axes = g.normal(size=(jn, 3))
    phase = g.uniform(0, 2 * np.pi, size=jn)
    freq = g.uniform(0.3, 1.2, size=jn)
    frames = []
    for f in range(n_frames):
        t = f / fps
        q = np.array([quat_from_axis_angle(axes[j], amplitude * np.sin(2 * np.pi * freq[j] * t + phase[j]))
                      for j in range(jn)])
        q[0] = [1.0, 0.0, 0.0, 0.0]
        yaw = quat_from_axis_angle([0.0, 1.0, 0.0], 0.3 * np.sin(2 * np.pi * 0.2 * t))
        frames.append(PoseFrame(q, np.array([0.0, 0.02 * np.sin(2 * np.pi * t), 0.0]), yaw))
    return MotionSequence(frames, fps, None, name)
