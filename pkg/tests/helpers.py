"""Small builders shared by several test modules."""

import numpy as np

from splatgen.assets import N_KEYPOINTS
from splatgen.camera import Camera
from splatgen.composition import KeypointSet
from splatgen.dataset import AnnotationRecord, ManifestEntry
from splatgen.kinematics import PoseFrame


def make_record(image_id=1, clip_id="c0", frame=0, seed=0, size=64):
    g = np.random.default_rng(seed)
    xy = g.uniform(5, size - 5, size=(N_KEYPOINTS, 2))
    vis = np.where(g.uniform(size=N_KEYPOINTS) < 0.8, 2, 0)
    xy[vis == 0] = 0
    cam = Camera(60.0, 60.0, size / 2, size / 2, size, size, np.eye(3), np.array([0, 0, 3.0]))
    return AnnotationRecord(
        image_id=image_id, clip_id=clip_id, frame_index=frame,
        keypoints=KeypointSet(xy, vis), bbox=(1.0, 2.0, size - 3.0, size - 4.0), camera=cam,
        pose=PoseFrame.identity(3), joints_3d=g.normal(size=(N_KEYPOINTS, 3)),
        width=size, height=size)


def make_entry(clip_id, frames, fps=30.0, split="train", subject="s0", sport="baseball"):
    return ManifestEntry(clip_id=clip_id, sport=sport, subject_id=subject, motion_id="m",
                         split=split, fps=fps, frame_count=frames)
