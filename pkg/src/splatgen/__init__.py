"""Synthetic human-pose datasets from skinned 3D Gaussian avatars.

Pipeline: skeleton pose -> forward kinematics -> linear blend skinning of the
Gaussians -> tile-based splat rendering -> background compositing -> projected
COCO-WholeBody keypoints and bounding boxes -> clips, splits and a manifest.
"""

__version__ = "0.1.0"
