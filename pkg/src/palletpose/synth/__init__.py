from .annotation import FrameAnnotation, ObjectAnnotation, annotate_frame, read_annotation
from .config import DatasetConfig, preset
from .generate import DatasetManifest, generate_dataset
from .render import render_frame
from .scene import SceneSpec, compose_scene, orbit_pose, sample_orbit_pose

__all__ = [
    "DatasetConfig",
    "DatasetManifest",
    "FrameAnnotation",
    "ObjectAnnotation",
    "SceneSpec",
    "annotate_frame",
    "compose_scene",
    "generate_dataset",
    "orbit_pose",
    "preset",
    "read_annotation",
    "render_frame",
    "sample_orbit_pose",
]
