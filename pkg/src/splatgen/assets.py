"""Canonical Gaussian avatars, skeletons and the ``.gsa`` container.

A ``.gsa`` file is::

    b"GSA1" | uint32 LE header length | UTF-8 JSON header (space padded so
    the blob starts 4-byte aligned) | float32 LE Gaussian block |
    (uint32 joint, float32 weight) LE skinning pairs

See ``docs/formats.md`` for the field-by-field layout.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as _rng
from .geometry import UNIT_TOL, random_unit_quaternions

log = logging.getLogger(__name__)

K_MAX = 4
MAX_SH_DEGREE = 3
WEIGHT_SUM_TOL = 1e-5
GSA_MAGIC = b"GSA1"
GSA_VERSION = 1

COCO_WB_BODY_KEYPOINTS = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
    "left_big_toe", "left_small_toe", "left_heel",
    "right_big_toe", "right_small_toe", "right_heel",
)
N_KEYPOINTS = len(COCO_WB_BODY_KEYPOINTS)

# 1-based limb pairs, COCO body skeleton plus the whole-body foot links.
COCO_WB_SKELETON = (
    (16, 14), (14, 12), (17, 15), (15, 13), (12, 13), (6, 12), (7, 13),
    (6, 7), (6, 8), (7, 9), (8, 10), (9, 11), (2, 3), (1, 2), (1, 3),
    (2, 4), (3, 5), (4, 6), (5, 7),
    (16, 18), (16, 19), (16, 20), (17, 21), (17, 22), (17, 23),
)


class AssetError(ValueError):
    """Asset validation failure; ``index`` names the offending Gaussian when known."""

    def __init__(self, message: str, index: int | None = None):
        if index is not None:
            message = f"gaussian {index}: {message}"
        super().__init__(message)
        self.index = index


def sh_coeff_count(degree: int) -> int:
    return (degree + 1) ** 2


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int | None
    offset: tuple[float, float, float]


@dataclass(frozen=True)
class Skeleton:
    """Joint tree plus the map from the 23 COCO-WB body slots to joints."""

    name: str
    joints: tuple[Joint, ...]
    keypoint_map: tuple[int, ...]

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def parents(self) -> list[int | None]:
        return [j.parent for j in self.joints]

    def validate(self) -> None:
        n = self.n_joints
        if n == 0:
            raise AssetError("skeleton has no joints")
        roots = [i for i, j in enumerate(self.joints) if j.parent is None]
        if len(roots) != 1:
            raise AssetError(f"skeleton must have exactly one root, found {len(roots)}")
        for i, j in enumerate(self.joints):
            if j.parent is not None and not 0 <= j.parent < n:
                raise AssetError(f"joint {i} ({j.name}) has invalid parent {j.parent}")
            if not np.all(np.isfinite(j.offset)) or len(j.offset) != 3:
                raise AssetError(f"joint {i} ({j.name}) has a bad rest offset")
        self.topological_order()
        if len(self.keypoint_map) != N_KEYPOINTS:
            raise AssetError(
                f"keypoint_map covers {len(self.keypoint_map)} slots, need {N_KEYPOINTS}")
        for slot, j in enumerate(self.keypoint_map):
            if not 0 <= j < n:
                raise AssetError(f"keypoint slot {slot} maps to invalid joint {j}")

    def topological_order(self) -> list[int]:
        """Joint indices with every parent ahead of its children."""
        children: dict[int | None, list[int]] = {}
        for i, j in enumerate(self.joints):
            children.setdefault(j.parent, []).append(i)
        order: list[int] = []
        stack = list(reversed(children.get(None, [])))
        while stack:
            i = stack.pop()
            order.append(i)
            stack.extend(reversed(children.get(i, [])))
        if len(order) != self.n_joints:
            raise AssetError("skeleton parent links contain a cycle")
        return order

    def rest_positions(self) -> np.ndarray:
        pos = np.zeros((self.n_joints, 3))
        for i in self.topological_order():
            j = self.joints[i]
            base = pos[j.parent] if j.parent is not None else 0.0
            pos[i] = base + np.asarray(j.offset, dtype=np.float64)
        return pos

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "joints": [
                {"name": j.name, "parent": j.parent, "offset": [float(v) for v in j.offset]}
                for j in self.joints
            ],
            "keypoint_map": list(self.keypoint_map),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Skeleton":
        try:
            joints = tuple(
                Joint(str(j["name"]), None if j["parent"] is None else int(j["parent"]),
                      tuple(float(v) for v in j["offset"]))
                for j in d["joints"]
            )
            sk = cls(str(d.get("name", "skeleton")), joints,
                     tuple(int(k) for k in d["keypoint_map"]))
        except (KeyError, TypeError, ValueError) as e:
            raise AssetError(f"malformed skeleton: {e}") from e
        sk.validate()
        return sk


def humanoid_skeleton() -> Skeleton:
    """27-joint standing proxy (y up, facing +z, subject's left on +x)."""
    spec = [
        ("pelvis", None, (0.0, 0.95, 0.0)),
        ("spine", 0, (0.0, 0.25, 0.0)),
        ("neck", 1, (0.0, 0.25, 0.0)),
        ("head", 2, (0.0, 0.12, 0.0)),
        ("nose", 3, (0.0, 0.0, 0.1)),
        ("left_eye", 3, (0.035, 0.04, 0.08)),
        ("right_eye", 3, (-0.035, 0.04, 0.08)),
        ("left_ear", 3, (0.08, 0.02, 0.0)),
        ("right_ear", 3, (-0.08, 0.02, 0.0)),
        ("left_shoulder", 1, (0.18, 0.22, 0.0)),
        ("left_elbow", 9, (0.05, -0.27, 0.0)),
        ("left_wrist", 10, (0.02, -0.25, 0.0)),
        ("right_shoulder", 1, (-0.18, 0.22, 0.0)),
        ("right_elbow", 12, (-0.05, -0.27, 0.0)),
        ("right_wrist", 13, (-0.02, -0.25, 0.0)),
        ("left_hip", 0, (0.1, -0.05, 0.0)),
        ("left_knee", 15, (0.0, -0.42, 0.0)),
        ("left_ankle", 16, (0.0, -0.42, 0.0)),
        ("left_big_toe", 17, (0.02, -0.06, 0.15)),
        ("left_small_toe", 17, (0.06, -0.06, 0.12)),
        ("left_heel", 17, (0.0, -0.06, -0.05)),
        ("right_hip", 0, (-0.1, -0.05, 0.0)),
        ("right_knee", 21, (0.0, -0.42, 0.0)),
        ("right_ankle", 22, (0.0, -0.42, 0.0)),
        ("right_big_toe", 23, (-0.02, -0.06, 0.15)),
        ("right_small_toe", 23, (-0.06, -0.06, 0.12)),
        ("right_heel", 23, (0.0, -0.06, -0.05)),
    ]
    joints = tuple(Joint(n, p, o) for n, p, o in spec)
    index = {j.name: i for i, j in enumerate(joints)}
    kmap = tuple(index[k] for k in COCO_WB_BODY_KEYPOINTS)
    return Skeleton("humanoid27", joints, kmap)


def chain_skeleton(n_joints: int = 2, offset=(0.0, 1.0, 0.0)) -> Skeleton:
    """A straight chain; every keypoint slot maps to the last joint."""
    joints = [Joint("j0", None, (0.0, 0.0, 0.0))]
    joints += [Joint(f"j{i}", i - 1, tuple(offset)) for i in range(1, n_joints)]
    return Skeleton(f"chain{n_joints}", tuple(joints), (n_joints - 1,) * N_KEYPOINTS)


@dataclass(frozen=True)
class Gaussian:
    centroid: np.ndarray
    rotation: np.ndarray
    scale: np.ndarray
    opacity: float
    features: np.ndarray


@dataclass(frozen=True, eq=False)
class GaussianAsset:
    """Structure-of-arrays Gaussian avatar, float32 storage.

    ``skin_joints``/``skin_weights`` hold up to ``K_MAX`` (joint, weight)
    pairs per Gaussian; unused slots carry weight 0.
    """

    centroids: np.ndarray       # (N, 3)
    rotations: np.ndarray       # (N, 4) w-first unit quaternions
    scales: np.ndarray          # (N, 3)
    opacities: np.ndarray       # (N,)
    features: np.ndarray        # (N, (deg+1)^2, 3)
    skin_joints: np.ndarray     # (N, K) int32
    skin_weights: np.ndarray    # (N, K) float32
    skeleton: Skeleton
    sh_degree: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_gaussians(self) -> int:
        return self.centroids.shape[0]

    @property
    def skeleton_id(self) -> str:
        return self.skeleton.name

    def gaussian(self, i: int) -> Gaussian:
        return Gaussian(self.centroids[i], self.rotations[i], self.scales[i],
                        float(self.opacities[i]), self.features[i])

    def dense_skinning(self) -> np.ndarray:
        w = np.zeros((self.n_gaussians, self.skeleton.n_joints), dtype=np.float64)
        rows = np.repeat(np.arange(self.n_gaussians), self.skin_joints.shape[1])
        np.add.at(w, (rows, self.skin_joints.ravel()), self.skin_weights.ravel())
        return w

    def validate(self) -> None:
        validate_asset(self)

    def equals(self, other: "GaussianAsset") -> bool:
        """Field-for-field, bit-exact comparison."""
        arrays = ("centroids", "rotations", "scales", "opacities", "features",
                  "skin_joints", "skin_weights")
        return (self.sh_degree == other.sh_degree
                and self.skeleton == other.skeleton
                and all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
                and all(getattr(self, a).dtype == getattr(other, a).dtype for a in arrays))


def _first_bad_row(mask: np.ndarray) -> int | None:
    bad = np.flatnonzero(mask)
    return int(bad[0]) if bad.size else None


def validate_asset(a: GaussianAsset) -> None:
    """Raise AssetError on the first violated invariant."""
    a.skeleton.validate()
    n = a.centroids.shape[0] if a.centroids.ndim == 2 else 0
    if n < 1:
        raise AssetError("asset needs at least one Gaussian")
    if not 0 <= a.sh_degree <= MAX_SH_DEGREE:
        raise AssetError(f"sh_degree {a.sh_degree} outside 0..{MAX_SH_DEGREE}")
    k = sh_coeff_count(a.sh_degree)
    shapes = {
        "centroids": (n, 3), "rotations": (n, 4), "scales": (n, 3), "opacities": (n,),
        "features": (n, k, 3),
    }
    for name, shape in shapes.items():
        if getattr(a, name).shape != shape:
            raise AssetError(f"{name} has shape {getattr(a, name).shape}, expected {shape}")
    if a.skin_joints.shape != a.skin_weights.shape or a.skin_joints.shape[0] != n:
        raise AssetError(f"skinning rows {a.skin_joints.shape[0]} do not match N={n}")
    if a.skin_joints.shape[1] > K_MAX:
        raise AssetError(f"more than {K_MAX} skinning pairs per row")

    for name in ("centroids", "rotations", "scales", "opacities", "features", "skin_weights"):
        arr = getattr(a, name).reshape(n, -1)
        i = _first_bad_row(~np.all(np.isfinite(arr), axis=1))
        if i is not None:
            raise AssetError(f"non-finite value in {name}", i)

    qn = np.linalg.norm(a.rotations.astype(np.float64), axis=1)
    i = _first_bad_row(np.abs(qn - 1.0) > UNIT_TOL)
    if i is not None:
        raise AssetError(f"rotation quaternion has norm {qn[i]:.8g}, not unit", i)
    i = _first_bad_row(np.any(a.scales <= 0, axis=1))
    if i is not None:
        raise AssetError("scale components must be strictly positive", i)
    i = _first_bad_row((a.opacities < 0) | (a.opacities > 1))
    if i is not None:
        raise AssetError(f"opacity {a.opacities[i]} outside [0, 1]", i)

    w = a.skin_weights.astype(np.float64)
    i = _first_bad_row(np.any((w < 0) | (w > 1), axis=1))
    if i is not None:
        raise AssetError("skinning weight outside [0, 1]", i)
    i = _first_bad_row(np.abs(w.sum(axis=1) - 1.0) > WEIGHT_SUM_TOL)
    if i is not None:
        raise AssetError(f"skinning weights sum to {w[i].sum():.8g}, not 1", i)
    j = a.skin_joints
    i = _first_bad_row(np.any((w > 0) & ((j < 0) | (j >= a.skeleton.n_joints)), axis=1))
    if i is not None:
        raise AssetError("skinning references a joint outside the skeleton", i)


def sparsify_weights(dense, k_max: int = K_MAX) -> tuple[np.ndarray, np.ndarray]:
    """Keep the ``k_max`` largest weights per row and renormalize.

    Ties are broken toward the lower joint index so the result is deterministic.
    """
    dense = np.asarray(dense, dtype=np.float64)
    n, jn = dense.shape
    k = min(k_max, jn)
    order = np.argsort(-dense, axis=1, kind="stable")[:, :k]
    vals = np.take_along_axis(dense, order, axis=1)
    vals = np.where(vals > 0, vals, 0.0)
    sums = vals.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise AssetError("skinning row has no positive weight", int(np.flatnonzero(sums[:, 0] <= 0)[0]))
    vals = vals / sums
    # Canonical slot order: by joint index, zeros last.
    key = np.where(vals > 0, order, jn + np.arange(k))
    perm = np.argsort(key, axis=1, kind="stable")
    joints = np.take_along_axis(order, perm, axis=1)
    vals = np.take_along_axis(vals, perm, axis=1)
    joints = np.where(vals > 0, joints, 0)
    if k < k_max:
        joints = np.pad(joints, ((0, 0), (0, k_max - k)))
        vals = np.pad(vals, ((0, 0), (0, k_max - k)))
    return joints.astype(np.int32), vals.astype(np.float32)


def make_asset(centroids, rotations, scales, opacities, features, skinning,
               skeleton: Skeleton, sh_degree: int = 0, meta: dict | None = None) -> GaussianAsset:
    """Build and validate an asset from (possibly dense) per-Gaussian data.

    ``skinning`` is either a dense ``(N, J)`` matrix or a ``(joints, weights)``
    pair of ``(N, K)`` arrays.
    """
    if isinstance(skinning, tuple):
        sj, sw = (np.asarray(x) for x in skinning)
    else:
        dense = np.asarray(skinning, dtype=np.float64)
        if np.count_nonzero(dense, axis=1).max(initial=0) > K_MAX:
            log.warning("dense skinning truncated to top-%d weights per row", K_MAX)
        sj, sw = sparsify_weights(dense)
    asset = GaussianAsset(
        centroids=np.ascontiguousarray(centroids, dtype=np.float32),
        rotations=np.ascontiguousarray(rotations, dtype=np.float32),
        scales=np.ascontiguousarray(scales, dtype=np.float32),
        opacities=np.ascontiguousarray(opacities, dtype=np.float32),
        features=np.ascontiguousarray(features, dtype=np.float32),
        skin_joints=np.ascontiguousarray(sj, dtype=np.int32),
        skin_weights=np.ascontiguousarray(sw, dtype=np.float32),
        skeleton=skeleton,
        sh_degree=int(sh_degree),
        meta=dict(meta or {}),
    )
    validate_asset(asset)
    return asset


# --------------------------------------------------------------------------- IO

def _gaussian_row_width(degree: int) -> int:
    return 3 + 4 + 3 + 1 + 3 * sh_coeff_count(degree)


def save_asset(asset: GaussianAsset, path) -> None:
    validate_asset(asset)
    n = asset.n_gaussians
    k = asset.skin_joints.shape[1]
    header = {
        "format": "gsa",
        "version": GSA_VERSION,
        "n_gaussians": n,
        "n_joints": asset.skeleton.n_joints,
        "sh_degree": asset.sh_degree,
        "pairs_per_row": k,
        "skeleton": asset.skeleton.to_dict(),
        "meta": asset.meta,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    pad = (-(len(GSA_MAGIC) + 4 + len(raw))) % 4
    raw += b" " * pad
    block = np.concatenate([
        asset.centroids, asset.rotations, asset.scales, asset.opacities[:, None],
        asset.features.reshape(n, -1),
    ], axis=1).astype("<f4")
    pairs = np.empty((n, k), dtype=[("j", "<u4"), ("w", "<f4")])
    pairs["j"] = asset.skin_joints
    pairs["w"] = asset.skin_weights
    with open(path, "wb") as f:
        f.write(GSA_MAGIC)
        f.write(struct.pack("<I", len(raw)))
        f.write(raw)
        f.write(block.tobytes())
        f.write(pairs.tobytes())


def read_gsa_header(path) -> dict:
    with open(path, "rb") as f:
        data = f.read(8)
        if len(data) < 8 or data[:4] != GSA_MAGIC:
            raise AssetError(f"{path}: not a .gsa file")
        (hlen,) = struct.unpack("<I", data[4:8])
        return json.loads(f.read(hlen))


def load_asset(path) -> GaussianAsset:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 8 or data[:4] != GSA_MAGIC:
        raise AssetError(f"{path}: bad magic, not a .gsa file")
    (hlen,) = struct.unpack("<I", data[4:8])
    try:
        header = json.loads(data[8:8 + hlen])
        n = int(header["n_gaussians"])
        degree = int(header["sh_degree"])
        k = int(header["pairs_per_row"])
        skeleton = Skeleton.from_dict(header["skeleton"])
        n_joints = int(header["n_joints"])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise AssetError(f"{path}: malformed header: {e}") from e
    if n < 1 or k < 1 or not 0 <= degree <= MAX_SH_DEGREE:
        raise AssetError(f"{path}: header counts out of range (n={n}, k={k}, deg={degree})")
    if n_joints != skeleton.n_joints:
        raise AssetError(f"{path}: n_joints {n_joints} disagrees with skeleton")
    width = _gaussian_row_width(degree)
    off = 8 + hlen
    need = off + 4 * n * width + 8 * n * k
    if len(data) != need:
        raise AssetError(f"{path}: blob is {len(data) - off} bytes, expected {need - off}")
    block = np.frombuffer(data, dtype="<f4", count=n * width, offset=off).reshape(n, width)
    pairs = np.frombuffer(data, dtype=[("j", "<u4"), ("w", "<f4")], count=n * k,
                          offset=off + 4 * n * width).reshape(n, k)
    kc = sh_coeff_count(degree)
    cols = np.split(block.astype(np.float32), [3, 7, 10, 11], axis=1)
    joints = pairs["j"].astype(np.int64)
    weights = pairs["w"].astype(np.float32)
    if np.any((weights > 0) & (joints >= skeleton.n_joints)):
        i = _first_bad_row(np.any((weights > 0) & (joints >= skeleton.n_joints), axis=1))
        raise AssetError("skinning references a joint outside the skeleton", i)
    if k > K_MAX:
        log.warning("%s: %d skinning pairs per row, truncating to top-%d", path, k, K_MAX)
        i = _first_bad_row(~np.all(np.isfinite(weights), axis=1))
        if i is not None:
            raise AssetError("non-finite value in skin_weights", i)
        dense = np.zeros((n, skeleton.n_joints))
        np.add.at(dense, (np.repeat(np.arange(n), k), joints.ravel()), weights.ravel())
        joints, weights = sparsify_weights(dense)
    asset = GaussianAsset(
        centroids=np.ascontiguousarray(cols[0]),
        rotations=np.ascontiguousarray(cols[1]),
        scales=np.ascontiguousarray(cols[2]),
        opacities=np.ascontiguousarray(cols[3][:, 0]),
        features=np.ascontiguousarray(cols[4].reshape(n, kc, 3)),
        skin_joints=np.ascontiguousarray(joints, dtype=np.int32),
        skin_weights=np.ascontiguousarray(weights, dtype=np.float32),
        skeleton=skeleton,
        sh_degree=degree,
        meta=dict(header.get("meta") or {}),
    )
    validate_asset(asset)
    return asset


# ------------------------------------------------------------------ procedural

SH_C0 = 0.28209479177387814


def bone_segments(skeleton: Skeleton) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """(driving joint, start, end) per bone; a lone root gives a zero-length bone."""
    rest = skeleton.rest_positions()
    bones = [(j.parent, rest[j.parent], rest[i])
             for i, j in enumerate(skeleton.joints) if j.parent is not None]
    if not bones:
        bones = [(0, rest[0], rest[0])]
    return bones


def procedural_test_asset(n_gaussians: int, skeleton: Skeleton, seed: int,
                          sh_degree: int = 0) -> GaussianAsset:
    """Capsule-per-bone proxy body.

    Gaussians are spread evenly along each bone (round-robin over bones) with a
    sub-sigma jitter, and each is bound with weight 1 to the joint that drives
    its bone, so LBS moves every Gaussian rigidly with that joint.
    """
    skeleton.validate()
    if n_gaussians < skeleton.n_joints:
        raise ValueError(
            f"n_gaussians={n_gaussians} is below the joint count {skeleton.n_joints}")
    g = np.random.default_rng(_rng.derive_seed(seed, _rng.STREAM_PROCEDURAL))
    bones = bone_segments(skeleton)
    nb = len(bones)
    bone_of = np.arange(n_gaussians) % nb
    counts = np.bincount(bone_of, minlength=nb)
    rank = np.arange(n_gaussians) // nb
    s = (rank + 0.5) / counts[bone_of]
    starts = np.array([b[1] for b in bones])[bone_of]
    ends = np.array([b[2] for b in bones])[bone_of]
    driver = np.array([b[0] for b in bones])[bone_of]

    scales = g.uniform(0.015, 0.035, size=(n_gaussians, 3))
    jitter = g.uniform(-0.5, 0.5, size=(n_gaussians, 3)) * scales.min(axis=1, keepdims=True)
    centroids = starts + s[:, None] * (ends - starts) + jitter
    rotations = random_unit_quaternions(g, n_gaussians)
    opacities = g.uniform(0.6, 1.0, size=n_gaussians)

    k = sh_coeff_count(sh_degree)
    part_colors = g.uniform(0.15, 0.9, size=(nb, 3))
    features = np.zeros((n_gaussians, k, 3))
    features[:, 0, :] = (part_colors[bone_of] - 0.5) / SH_C0
    if k > 1:
        features[:, 1:, :] = g.normal(0.0, 0.05, size=(n_gaussians, k - 1, 3))

    joints = np.zeros((n_gaussians, K_MAX), dtype=np.int32)
    weights = np.zeros((n_gaussians, K_MAX), dtype=np.float32)
    joints[:, 0] = driver
    weights[:, 0] = 1.0
    return make_asset(centroids, rotations, scales, opacities, features, (joints, weights),
                      skeleton, sh_degree, meta={"procedural_seed": int(seed)})
