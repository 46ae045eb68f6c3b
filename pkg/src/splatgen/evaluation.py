"""Keypoint accuracy (AP at pixel thresholds) and embedding-distribution metrics."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assets import N_KEYPOINTS

DEFAULT_REF_SIZE = 256.0
DEFAULT_THRESHOLDS = (5.0, 10.0, 15.0)
DEFAULT_KID_BLOCK = 100
EMB_MAGIC = b"EMB1"


class EvaluationError(ValueError):
    pass


# ------------------------------------------------------------------------ AP

def _bbox_scale(bbox, ref_size: float) -> float:
    _, _, w, h = bbox
    diag = float(np.hypot(w, h))
    # Degenerate boxes fall back to raw pixel distances.
    return ref_size / diag if diag > 0 else 1.0


def keypoint_errors(pred: dict, gt: dict, bboxes: dict, ref_size: float = DEFAULT_REF_SIZE) -> np.ndarray:
    """Normalized distances for every ground-truth keypoint with visibility > 0.

    ``pred`` and ``gt`` map image id to ``(23, 3)`` arrays ``(x, y, v)``;
    ``bboxes`` maps image id to ``(x, y, w, h)`` of the ground-truth subject.
    """
    ids = sorted(set(pred) & set(gt))
    if not ids:
        raise EvaluationError("predictions and ground truth share no image ids")
    errs = []
    for i in ids:
        g = np.asarray(gt[i], dtype=np.float64).reshape(N_KEYPOINTS, 3)
        p = np.asarray(pred[i], dtype=np.float64).reshape(N_KEYPOINTS, 3)
        counted = g[:, 2] > 0
        d = np.hypot(p[counted, 0] - g[counted, 0], p[counted, 1] - g[counted, 1])
        errs.append(d * _bbox_scale(bboxes[i], ref_size))
    errs = np.concatenate(errs)
    if errs.size == 0:
        raise EvaluationError("ground truth has no labelled keypoints")
    return errs


def ap_at_threshold(pred: dict, gt: dict, bboxes: dict, t: float,
                    ref_size: float = DEFAULT_REF_SIZE) -> float:
    """Percentage of labelled keypoints within ``t`` px after bbox normalization.

    A keypoint counts when ``|pred - gt| * ref_size / bbox_diag <= t``.
    """
    if t <= 0:
        raise EvaluationError("threshold must be positive")
    errs = keypoint_errors(pred, gt, bboxes, ref_size)
    return 100.0 * np.count_nonzero(errs <= t) / errs.size


def ap_table(pred: dict, gt: dict, bboxes: dict, thresholds=DEFAULT_THRESHOLDS,
             ref_size: float = DEFAULT_REF_SIZE) -> dict[float, float]:
    errs = keypoint_errors(pred, gt, bboxes, ref_size)
    return {float(t): 100.0 * np.count_nonzero(errs <= t) / errs.size for t in thresholds}


def coco_keypoints(coco) -> tuple[dict, dict]:
    """(keypoints by image id, bbox by image id) from a COCO dict or a results list."""
    anns = coco["annotations"] if isinstance(coco, dict) else coco
    kps, boxes = {}, {}
    for a in anns:
        i = int(a["image_id"])
        if i in kps:
            # Multiple detections per image: keep the highest scoring one.
            if a.get("score", 0.0) <= kps[i][1]:
                continue
        arr = np.asarray(a["keypoints"], dtype=np.float64)
        if arr.size != 3 * N_KEYPOINTS:
            raise EvaluationError(f"image {i}: expected {3 * N_KEYPOINTS} keypoint values, got {arr.size}")
        kps[i] = (arr.reshape(N_KEYPOINTS, 3), a.get("score", 0.0))
        if "bbox" in a:
            boxes[i] = tuple(float(v) for v in a["bbox"])
    return {i: v[0] for i, v in kps.items()}, boxes


def evaluate_coco_ap(gt_coco, pred_coco, thresholds=DEFAULT_THRESHOLDS,
                     ref_size: float = DEFAULT_REF_SIZE) -> dict[float, float]:
    gt, boxes = coco_keypoints(gt_coco)
    pred, _ = coco_keypoints(pred_coco)
    missing = [i for i in gt if i not in boxes]
    if missing:
        raise EvaluationError(f"ground truth lacks bboxes for images {missing[:5]}")
    return ap_table(pred, gt, boxes, thresholds, ref_size)


# ---------------------------------------------------------------- embeddings

@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    vectors: np.ndarray  # (n, d)
    source: str = ""

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise EvaluationError("embeddings must be a 2-D (n, d) array")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]


def save_embeddings(emb: EmbeddingSet, path) -> None:
    header = json.dumps({"n": emb.n, "d": emb.d, "source": emb.source}, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(EMB_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(emb.vectors, dtype="<f4").tobytes())


def load_embeddings(path) -> EmbeddingSet:
    data = Path(path).read_bytes()
    if data[:4] != EMB_MAGIC:
        raise EvaluationError(f"{path}: not an .emb file")
    (hlen,) = struct.unpack("<I", data[4:8])
    h = json.loads(data[8:8 + hlen])
    n, d = int(h["n"]), int(h["d"])
    blob = data[8 + hlen:]
    if len(blob) != 4 * n * d:
        raise EvaluationError(f"{path}: blob holds {len(blob)} bytes, header says {n}x{d} floats")
    vec = np.frombuffer(blob, dtype="<f4").reshape(n, d).astype(np.float64)
    return EmbeddingSet(vec, str(h.get("source", "")))


def _as_array(x) -> np.ndarray:
    return np.asarray(x.vectors if isinstance(x, EmbeddingSet) else x, dtype=np.float64)


def _sqrt_trace_product(s1: np.ndarray, s2: np.ndarray) -> float:
    """Tr((S1 S2)^1/2) via the symmetric form S1^1/2 S2 S1^1/2."""
    w, v = np.linalg.eigh(0.5 * (s1 + s1.T))
    w = _clamp_eigs(w, np.trace(s1))
    root = (v * np.sqrt(w)) @ v.T
    m = root @ s2 @ root
    w2 = np.linalg.eigvalsh(0.5 * (m + m.T))
    w2 = _clamp_eigs(w2, np.trace(m))
    return float(np.sqrt(w2).sum())


def _clamp_eigs(w: np.ndarray, trace: float) -> np.ndarray:
    floor = -1e-8 * max(abs(trace), 1e-300)
    if np.any(w < floor):
        raise EvaluationError(f"covariance has a negative eigenvalue {w.min():.3g}")
    return np.maximum(w, 0.0)


def fid(a, b) -> float:
    """Frechet distance between Gaussian fits of two embedding sets."""
    x, y = _as_array(a), _as_array(b)
    if x.shape[1] != y.shape[1]:
        raise EvaluationError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise EvaluationError("FID needs at least two samples per set")
    mu1, mu2 = x.mean(axis=0), y.mean(axis=0)
    s1 = np.atleast_2d(np.cov(x, rowvar=False))
    s2 = np.atleast_2d(np.cov(y, rowvar=False))
    diff = mu1 - mu2
    return float(diff @ diff + np.trace(s1) + np.trace(s2) - 2.0 * _sqrt_trace_product(s1, s2))


def polynomial_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def mmd2_unbiased(x: np.ndarray, y: np.ndarray) -> float:
    m, n = x.shape[0], y.shape[0]
    kxx = polynomial_kernel(x, x)
    kyy = polynomial_kernel(y, y)
    kxy = polynomial_kernel(x, y)
    sxx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    syy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    return float(sxx + syy - 2.0 * kxy.sum() / (m * n))


def kid_blocks(a, b, block: int = DEFAULT_KID_BLOCK) -> np.ndarray:
    """Unbiased MMD^2 on each pair of aligned, non-overlapping blocks."""
    x, y = _as_array(a), _as_array(b)
    if x.shape[1] != y.shape[1]:
        raise EvaluationError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if block < 2:
        raise EvaluationError("KID block size must be at least 2")
    if block > x.shape[0] or block > y.shape[0]:
        raise EvaluationError(f"block {block} exceeds set sizes {x.shape[0]}, {y.shape[0]}")
    nb = min(x.shape[0], y.shape[0]) // block
    return np.array([mmd2_unbiased(x[k * block:(k + 1) * block], y[k * block:(k + 1) * block])
                     for k in range(nb)])


def default_block(a, b) -> int:
    """``DEFAULT_KID_BLOCK``, or the smaller set size when a set is shorter."""
    return min(DEFAULT_KID_BLOCK, _as_array(a).shape[0], _as_array(b).shape[0])


def kid(a, b, block: int | None = None) -> float:
    """Mean unbiased MMD^2 over blocks; may be slightly negative."""
    return float(kid_blocks(a, b, default_block(a, b) if block is None else block).mean())


def kid_with_error(a, b, block: int | None = None) -> tuple[float, float]:
    """(mean, standard error of the mean) over blocks."""
    est = kid_blocks(a, b, default_block(a, b) if block is None else block)
    se = float(est.std(ddof=1) / np.sqrt(est.size)) if est.size > 1 else float("nan")
    return float(est.mean()), se
