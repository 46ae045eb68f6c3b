"""Batch generation: sample scenes, pose, render, composite, annotate, emit."""

from __future__ import annotations

import json
import logging
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import rng
from .assets import load_asset
from .camera import Camera, sample_camera
from .composition import (bbox_from_alpha, bbox_from_keypoints, composite, load_background,
                          project_joint_keypoints)
from .config import RunConfig
from .dataset import (SPLITS, AnnotationRecord, ClipMeta, DatasetManifest, dumps, emit_clip,
                      format_summary, summarize_dataset, write_coco_wb)
from .kinematics import forward_kinematics, lbs_deform, load_motion
from .render import BACKEND, render

log = logging.getLogger(__name__)

IMAGE_ID_STRIDE = 1_000_000


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneSpec:
    clip_index: int
    asset_id: str
    background_id: str
    motion_id: str
    camera: Camera


def sample_scene(config: RunConfig, clip_index: int, assets=None, backgrounds=None,
                 motions=None) -> SceneSpec:
    """Independent uniform draws from each dictionary, keyed on ``(seed, clip_index)``."""
    assets = sorted(assets if assets is not None else config.assets())
    backgrounds = sorted(backgrounds if backgrounds is not None else config.backgrounds())
    motions = sorted(motions if motions is not None else config.motions())
    for label, d in (("asset", assets), ("background", backgrounds), ("motion", motions)):
        if not d:
            raise PipelineError(f"{label} dictionary is empty")
    s = config.seed
    return SceneSpec(
        clip_index,
        assets[rng.randint(len(assets), s, rng.STREAM_ASSET, clip_index)],
        backgrounds[rng.randint(len(backgrounds), s, rng.STREAM_BACKGROUND, clip_index)],
        motions[rng.randint(len(motions), s, rng.STREAM_MOTION, clip_index)],
        sample_camera(config.orbit, clip_index),
    )


class _Cache:
    """Load-once store for immutable inputs shared across worker threads."""

    def __init__(self, loader):
        self._loader = loader
        self._items: dict = {}
        self._lock = threading.Lock()

    def get(self, key, *args):
        with self._lock:
            if key not in self._items:
                self._items[key] = self._loader(*args)
            return self._items[key]


class _Resources:
    def __init__(self, config: RunConfig):
        self.asset_paths = config.assets()
        self.background_paths = config.backgrounds()
        self.motion_paths = config.motions()
        self.assets = _Cache(load_asset)
        self.motions = _Cache(load_motion)
        self.backgrounds = _Cache(load_background)
        self.width, self.height = config.width, config.height

    def asset(self, i):
        return self.assets.get(i, self.asset_paths[i])

    def motion(self, i):
        return self.motions.get(i, self.motion_paths[i])

    def background(self, i):
        return self.backgrounds.get(i, self.background_paths[i], self.width, self.height)


def available_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def clip_id_for(config: RunConfig, clip_index: int) -> str:
    return f"{config.sport}_{clip_index:06d}"


def render_clip(config: RunConfig, scene: SceneSpec, res: _Resources, split: str,
                num_threads: int = 0):
    """All frames of one clip: ``(frames, masks, meta)`` ready for ``emit_clip``."""
    asset = res.asset(scene.asset_id)
    motion = res.motion(scene.motion_id)
    bg = res.background(scene.background_id)
    skeleton = asset.skeleton
    if motion.frames[0].joint_rotations.shape[0] != skeleton.n_joints:
        raise PipelineError(
            f"motion {scene.motion_id} has {motion.frames[0].joint_rotations.shape[0]} joints, "
            f"asset {scene.asset_id} skeleton has {skeleton.n_joints}")
    clip_id = clip_id_for(config, scene.clip_index)
    explicit = config.use_motion_cameras and motion.cameras is not None
    smplx = motion.extra.get("smplx")
    frames, masks = [], []
    for f, pose in enumerate(motion.frames):
        if explicit:
            cam = motion.cameras[f]
            if (cam.width, cam.height) != (config.width, config.height):
                cam = cam.resized(config.width, config.height)
        elif config.orbit.frame_jitter_deg > 0:
            cam = sample_camera(config.orbit, scene.clip_index, f)
        else:
            cam = scene.camera
        transforms = forward_kinematics(skeleton, pose)
        out = render(lbs_deform(asset, transforms), cam, config.render, num_threads=num_threads)
        image = composite(out, bg)
        kps, joints3d = project_joint_keypoints(transforms, skeleton, cam)
        bbox = bbox_from_alpha(out.alpha) or bbox_from_keypoints(kps, cam.width, cam.height)
        rec = AnnotationRecord(
            image_id=(scene.clip_index + 1) * IMAGE_ID_STRIDE + f,
            clip_id=clip_id, frame_index=f, keypoints=kps, bbox=bbox, camera=cam, pose=pose,
            joints_3d=joints3d, width=cam.width, height=cam.height,
            smplx=smplx[f] if isinstance(smplx, list) and f < len(smplx) else None,
        )
        frames.append((image, rec))
        masks.append(out.alpha)
    meta = ClipMeta(
        clip_id=clip_id, sport=config.sport, subject_id=scene.asset_id,
        motion_id=scene.motion_id, split=split, fps=motion.fps, asset_id=scene.asset_id,
        background_id=scene.background_id,
        camera={"source": "motion_file"} if explicit else {
            "source": "orbit", **scene.camera.to_dict()},
    )
    return frames, masks, meta


def run_pipeline(config: RunConfig, overwrite: bool = False, progress=None) -> DatasetManifest:
    """Generate the whole dataset into ``config.output_dir``.

    Clip failures are isolated: the error is recorded in the manifest's
    ``failed_clips`` and the run continues. Output is byte-identical for a
    fixed config regardless of ``workers``.
    """
    progress = sys.stderr if progress is None else progress
    config.validate()
    out = Path(config.output_dir)
    if (out / "manifest.json").exists() and not overwrite:
        raise PipelineError(f"{out} already holds a dataset (use --overwrite to replace it)")
    if overwrite and (out / "manifest.json").exists():
        import shutil

        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)

    res = _Resources(config)
    asset_ids, bg_ids, motion_ids = sorted(res.asset_paths), sorted(res.background_paths), sorted(res.motion_paths)
    splits = {a: config.split_for(a) for a in asset_ids}
    workers = config.workers or available_cpus()
    render_threads = 1 if workers > 1 else 0

    def job(i: int):
        t0 = time.perf_counter()
        scene = sample_scene(config, i, asset_ids, bg_ids, motion_ids)
        cid = clip_id_for(config, i)
        try:
            frames, masks, meta = render_clip(config, scene, res, splits[scene.asset_id], render_threads)
            entry = emit_clip(frames, out, meta, masks if config.write_masks else None)
            dt = time.perf_counter() - t0
            print(f"[clip {cid}] {entry.frame_count} frames in {dt:.2f}s", file=progress)
            return entry, [r for _, r in frames], None, dt
        except Exception as e:  # noqa: BLE001 - clip-level isolation
            dt = time.perf_counter() - t0
            log.error("clip %s failed: %s", cid, e)
            print(f"[clip {cid}] FAILED: {e}", file=progress)
            return None, [], {"clip_id": cid, "error": f"{type(e).__name__}: {e}"}, dt

    indices = range(config.n_clips)
    if workers == 1:
        results = [job(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, indices))

    manifest = DatasetManifest(config=config.echo())
    by_split = {s: [] for s in SPLITS}
    run_log = []
    for i, (entry, records, failure, dt) in zip(indices, results):
        cid = clip_id_for(config, i)
        if entry is not None:
            manifest.clips.append(entry)
            by_split[entry.split].extend(records)
        else:
            manifest.failed.append(failure)
        run_log.append({"clip_id": cid, "status": "ok" if entry else "failed", "seconds": round(dt, 4),
                        **({"error": failure["error"]} if failure else {})})
    manifest.validate()
    for split, records in by_split.items():
        write_coco_wb(records, out / "annotations" / f"{split}.json")
    manifest.save(out / "manifest.json")
    (out / "run_log.json").write_text(json.dumps(
        {"backend": BACKEND, "workers": workers, "clips": run_log}, indent=1) + "\n")
    rows, total = summarize_dataset(manifest)
    print(format_summary(rows, total), file=progress)
    return manifest


__all__ = ["PipelineError", "SceneSpec", "dumps", "render_clip", "run_pipeline", "sample_scene"]
