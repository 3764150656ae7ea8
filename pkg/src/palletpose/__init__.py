"""Pallet 6D pose toolkit: synthetic data, belief-map codec, PnP and trajectory evaluation."""

from .geometry import (CameraIntrinsics, CuboidModel, Keypoints2D, Pose6D, compose, invert_pose,
                       project_cuboid, yaw_flip)

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics",
    "CuboidModel",
    "Keypoints2D",
    "Pose6D",
    "compose",
    "invert_pose",
    "project_cuboid",
    "yaw_flip",
]
