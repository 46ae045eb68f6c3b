"""Dataset layout: clip images, annotation records, COCO-WB files and manifests.

Output tree::

    manifest.json
    annotations/{split}.json          COCO-style, one file per split
    annotations/clips/{clip_id}.json  per-clip annotation records
    images/{clip_id}/frame_%06d.png
    masks/{clip_id}/frame_%06d.png    optional
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .assets import COCO_WB_BODY_KEYPOINTS, COCO_WB_SKELETON, N_KEYPOINTS
from .camera import Camera
from .composition import KeypointSet
from .kinematics import PoseFrame

SPLITS = ("train", "valid")
MANIFEST_VERSION = 1


class DatasetError(ValueError):
    pass


class DuplicateClipError(DatasetError):
    pass


class SplitLeakageError(DatasetError):
    pass


@dataclass(eq=False)
class AnnotationRecord:
    image_id: int
    clip_id: str
    frame_index: int
    keypoints: KeypointSet
    bbox: tuple[float, float, float, float]
    camera: Camera
    pose: PoseFrame
    joints_3d: np.ndarray          # (23, 3) m
    width: int
    height: int
    file_name: str = ""
    keypoint_source: str = "projected_joints"
    smplx: dict | None = None

    def to_dict(self) -> dict:
        d = {
            "image_id": self.image_id,
            "clip_id": self.clip_id,
            "frame_index": self.frame_index,
            "file_name": self.file_name,
            "width": self.width,
            "height": self.height,
            "keypoints": self.keypoints.to_flat(),
            "bbox": [float(v) for v in self.bbox],
            "camera": self.camera.to_dict(),
            "pose": self.pose.to_dict(),
            "joints_3d": np.asarray(self.joints_3d, dtype=np.float64).tolist(),
            "keypoint_source": self.keypoint_source,
        }
        if self.smplx is not None:
            d["smplx"] = self.smplx
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationRecord":
        return cls(
            image_id=int(d["image_id"]),
            clip_id=str(d["clip_id"]),
            frame_index=int(d["frame_index"]),
            keypoints=KeypointSet.from_array(d["keypoints"]),
            bbox=tuple(float(v) for v in d["bbox"]),
            camera=Camera.from_dict(d["camera"]),
            pose=PoseFrame.from_dict(d["pose"]),
            joints_3d=np.asarray(d["joints_3d"], dtype=np.float64),
            width=int(d["width"]),
            height=int(d["height"]),
            file_name=d.get("file_name", ""),
            keypoint_source=d.get("keypoint_source", "projected_joints"),
            smplx=d.get("smplx"),
        )


@dataclass
class ClipMeta:
    clip_id: str
    sport: str
    subject_id: str
    motion_id: str
    split: str
    fps: float
    asset_id: str = ""
    background_id: str = ""
    camera: dict = field(default_factory=dict)


@dataclass
class ManifestEntry:
    clip_id: str
    sport: str
    subject_id: str
    motion_id: str
    split: str
    fps: float
    frame_count: int
    asset_id: str = ""
    background_id: str = ""
    camera: dict = field(default_factory=dict)
    images_dir: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DatasetManifest:
    clips: list[ManifestEntry] = field(default_factory=list)
    failed: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def totals(self) -> dict:
        frames = sum(c.frame_count for c in self.clips)
        minutes = sum(c.frame_count / c.fps / 60.0 for c in self.clips)
        return {"clips": len(self.clips), "frames": frames, "play_time_min": minutes,
                "failed_clips": len(self.failed)}

    def validate(self) -> None:
        ids = [c.clip_id for c in self.clips]
        if len(set(ids)) != len(ids):
            raise DuplicateClipError("manifest has duplicate clip ids")
        for c in self.clips:
            if c.frame_count <= 0:
                raise DatasetError(f"clip {c.clip_id} has no frames")
            if c.split not in SPLITS:
                raise DatasetError(f"clip {c.clip_id} has unknown split {c.split!r}")
        check_subject_disjoint(self)

    def to_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "clips": [c.to_dict() for c in sorted(self.clips, key=lambda c: c.clip_id)],
            "failed_clips": sorted(self.failed, key=lambda f: f["clip_id"]),
            "totals": self.totals(),
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls([ManifestEntry(**c) for c in d.get("clips", [])],
                   list(d.get("failed_clips", [])), dict(d.get("config", {})))

    def save(self, path) -> None:
        Path(path).write_text(dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def dumps(obj) -> str:
    """Canonical JSON text used for every emitted file."""
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def check_subject_disjoint(manifest: DatasetManifest) -> None:
    seen: dict[tuple[str, str], str] = {}
    for c in manifest.clips:
        key = (c.sport, c.subject_id)
        if key in seen and seen[key] != c.split:
            raise SplitLeakageError(
                f"subject {c.subject_id!r} ({c.sport}) appears in both {seen[key]} and {c.split}")
        seen[key] = c.split


def frame_name(index: int) -> str:
    return f"frame_{index:06d}.png"


def _write_png(arr, path: Path, mode: str | None = None) -> None:
    from PIL import Image

    from .render import to_uint8

    a = np.asarray(arr)
    if a.dtype != np.uint8:
        a = to_uint8(a)
    Image.fromarray(a, mode=mode).save(path, optimize=False)


def clip_records_path(out_dir, clip_id: str) -> Path:
    return Path(out_dir) / "annotations" / "clips" / f"{clip_id}.json"


def emit_clip(frames, out_dir, clip_meta: ClipMeta, masks=None) -> ManifestEntry:
    """Write one clip's frames and records; return its manifest entry.

    ``frames`` is a sequence of ``(image, AnnotationRecord)``; images are
    float arrays in [0, 1] or uint8. ``masks`` optionally gives one alpha
    mask per frame, written as single-channel PNGs.
    """
    frames = list(frames)
    if not frames:
        raise DatasetError(f"clip {clip_meta.clip_id} has no frames")
    out_dir = Path(out_dir)
    img_dir = out_dir / "images" / clip_meta.clip_id
    rec_path = clip_records_path(out_dir, clip_meta.clip_id)
    if img_dir.exists() or rec_path.exists():
        raise DuplicateClipError(f"clip id {clip_meta.clip_id!r} already emitted in {out_dir}")
    rec_path.parent.mkdir(parents=True, exist_ok=True)
    img_dir.mkdir(parents=True)
    mask_dir = out_dir / "masks" / clip_meta.clip_id
    if masks is not None:
        mask_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i, (image, rec) in enumerate(frames):
        name = frame_name(i)
        rec.file_name = f"images/{clip_meta.clip_id}/{name}"
        _write_png(image, img_dir / name)
        if masks is not None:
            _write_png(masks[i], mask_dir / name, mode="L")
        records.append(rec.to_dict())
    rec_path.write_text(dumps({"clip_id": clip_meta.clip_id, "records": records}))
    return ManifestEntry(
        clip_id=clip_meta.clip_id, sport=clip_meta.sport, subject_id=clip_meta.subject_id,
        motion_id=clip_meta.motion_id, split=clip_meta.split, fps=float(clip_meta.fps),
        frame_count=len(frames), asset_id=clip_meta.asset_id,
        background_id=clip_meta.background_id, camera=clip_meta.camera,
        images_dir=f"images/{clip_meta.clip_id}",
    )


def load_clip_records(out_dir, clip_id: str) -> list[AnnotationRecord]:
    d = json.loads(clip_records_path(out_dir, clip_id).read_text())
    return [AnnotationRecord.from_dict(r) for r in d["records"]]


def coco_category() -> dict:
    return {
        "id": 1,
        "name": "person",
        "supercategory": "person",
        "keypoints": list(COCO_WB_BODY_KEYPOINTS),
        "skeleton": [list(p) for p in COCO_WB_SKELETON],
    }


def build_coco_wb(records) -> dict:
    """COCO-style dict with one image and one person annotation per record."""
    records = sorted(records, key=lambda r: r.image_id)
    images, annotations = [], []
    seen = set()
    for r in records:
        if r.image_id in seen:
            raise DatasetError(f"duplicate image id {r.image_id}")
        seen.add(r.image_id)
        flat = r.keypoints.to_flat()
        if len(flat) != 3 * N_KEYPOINTS:
            raise DatasetError(f"image {r.image_id}: keypoint array has length {len(flat)}")
        if r.width <= 0 or r.height <= 0:
            raise DatasetError(f"image {r.image_id}: bad dimensions {r.width}x{r.height}")
        x, y, w, h = r.bbox
        if x < 0 or y < 0 or x + w > r.width + 1e-9 or y + h > r.height + 1e-9:
            raise DatasetError(f"image {r.image_id}: bbox {r.bbox} outside the image")
        images.append({
            "id": r.image_id, "file_name": r.file_name, "width": r.width, "height": r.height,
            "clip_id": r.clip_id, "frame_index": r.frame_index,
        })
        ann = {
            "id": r.image_id,
            "image_id": r.image_id,
            "category_id": 1,
            "iscrowd": 0,
            "keypoints": flat,
            "num_keypoints": int(np.count_nonzero(r.keypoints.visibility)),
            "bbox": [float(v) for v in r.bbox],
            "area": float(w * h),
            "camera": r.camera.to_dict(),
            "pose": r.pose.to_dict(),
            "joints_3d": np.asarray(r.joints_3d, dtype=np.float64).tolist(),
            "keypoint_source": r.keypoint_source,
        }
        if r.smplx is not None:
            ann["smplx"] = r.smplx
        annotations.append(ann)
    return {"images": images, "annotations": annotations, "categories": [coco_category()]}


def write_coco_wb(records, path) -> dict:
    coco = build_coco_wb(records)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(coco))
    return coco


def read_coco(path) -> dict:
    return json.loads(Path(path).read_text())


# -------------------------------------------------------------------- summary

@dataclass
class SummaryRow:
    sport: str
    split: str
    subjects: int = 0
    clips: int = 0
    frames: int = 0
    play_time_min: float = 0.0


def summarize_dataset(manifest: DatasetManifest) -> tuple[list[SummaryRow], SummaryRow]:
    """Per (sport, split) counts plus a totals row equal to the column sums."""
    groups: dict[tuple[str, str], list[ManifestEntry]] = defaultdict(list)
    for c in manifest.clips:
        groups[(c.sport, c.split)].append(c)
    rows = []
    for (sport, split), clips in sorted(groups.items(), key=lambda kv: (kv[0][0], SPLITS.index(kv[0][1])
                                                                       if kv[0][1] in SPLITS else 99)):
        rows.append(SummaryRow(
            sport, split,
            subjects=len({c.subject_id for c in clips}),
            clips=len(clips),
            frames=sum(c.frame_count for c in clips),
            play_time_min=sum(c.frame_count / c.fps / 60.0 for c in clips),
        ))
    total = SummaryRow("Total", "-",
                       subjects=sum(r.subjects for r in rows),
                       clips=sum(r.clips for r in rows),
                       frames=sum(r.frames for r in rows),
                       play_time_min=sum(r.play_time_min for r in rows))
    return rows, total


def format_summary(rows: list[SummaryRow], total: SummaryRow) -> str:
    """Plain-text table; play time printed to one decimal minute."""
    head = f"{'Sport':<12}{'Split':<8}{'#Subjects':>10}{'#Clips':>10}{'#Frames':>12}{'Play Time (min)':>17}"
    lines = [head, "-" * len(head)]
    for r in rows + [total]:
        lines.append(f"{r.sport:<12}{r.split:<8}{r.subjects:>10,}{r.clips:>10,}{r.frames:>12,}"
                     f"{r.play_time_min:>17,.1f}")
    return "\n".join(lines)
