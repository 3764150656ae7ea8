"""NDDS-style annotation files.

Lengths inside the JSON are centimetres and quaternions are ordered
(x, y, z, w); everything in memory is metres. Cuboid corners follow the
toolkit's vertex order (index ``4*[x<0] + 2*[y<0] + [z<0]`` in the object
frame), with the centroid stored separately.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from ..errors import BehindCamera, ParseError, SceneRejection
from ..geometry import CameraIntrinsics, CuboidModel, Pose6D, project_cuboid
from .scene import SceneSpec

CLASS_NAME = "pallet"
CM = 100.0
SELF_CHECK_TOLERANCE = 1e-6  # px


@dataclass(frozen=True, eq=False)
class ObjectAnnotation:
    class_id: str
    pose: Pose6D               # camera <- object
    cuboid: np.ndarray         # (9, 3) camera frame, metres; centroid last
    projected: np.ndarray      # (9, 2) pixels; centroid last
    visible: bool


@dataclass(frozen=True, eq=False)
class FrameAnnotation:
    intrinsics: CameraIntrinsics
    objects: List[ObjectAnnotation]
    camera_pose: Pose6D = None  # world <- camera, informational


def annotate_frame(scene: SceneSpec, k: CameraIntrinsics, model: CuboidModel = None) -> FrameAnnotation:
    model = model or CuboidModel(scene.pallet_dimensions)
    objects = []
    for i in range(len(scene.pallet_poses)):
        pose = scene.object_in_camera(i).with_frames("camera", "object")
        try:
            kp, inside = project_cuboid(k, pose, model)
        except BehindCamera as exc:
            raise SceneRejection(f"pallet {i}: {exc}") from exc
        objects.append(ObjectAnnotation(CLASS_NAME, pose, pose.transform_points(model.vertices),
                                        kp.points, bool(inside)))
    return FrameAnnotation(k, objects, scene.camera_pose)


def _floats(a):
    return [float(v) for v in np.asarray(a).ravel()]


def _pairs(a, width):
    return [_floats(row) for row in np.asarray(a).reshape(-1, width)]


def check_consistency(ann: FrameAnnotation, model: CuboidModel) -> None:
    for obj in ann.objects:
        kp, _ = project_cuboid(ann.intrinsics, obj.pose, model)
        err = np.max(np.abs(kp.points - obj.projected))
        if not err <= SELF_CHECK_TOLERANCE:
            raise ValueError(f"projected cuboid disagrees with stored pose by {err:.3g} px")


def annotation_to_dict(ann: FrameAnnotation) -> dict:
    camera_data = {}
    if ann.camera_pose is not None:
        camera_data = {"location_worldframe": _floats(ann.camera_pose.translation * CM),
                       "quaternion_xyzw_worldframe": _floats(ann.camera_pose.rotation)}
    objects = []
    for obj in ann.objects:
        objects.append({
            "class": obj.class_id,
            "visibility": int(obj.visible),
            "location": _floats(obj.pose.translation * CM),
            "quaternion_xyzw": _floats(obj.pose.rotation),
            "cuboid_centroid": _floats(obj.cuboid[8] * CM),
            "projected_cuboid_centroid": _floats(obj.projected[8]),
            "cuboid": _pairs(obj.cuboid[:8] * CM, 3),
            "projected_cuboid": _pairs(obj.projected[:8], 2),
        })
    return {"camera_data": camera_data, "objects": objects}


def dumps(data) -> str:
    return json.dumps(data, indent=2) + "\n"


def write_annotation(path, ann: FrameAnnotation, model: CuboidModel) -> None:
    check_consistency(ann, model)
    Path(path).write_text(dumps(annotation_to_dict(ann)))


def camera_settings(k: CameraIntrinsics) -> dict:
    return {"camera_settings": [{
        "name": "Viewpoint",
        "intrinsic_settings": {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy},
        "captured_image_size": {"width": k.width, "height": k.height},
    }]}


def object_settings(model: CuboidModel) -> dict:
    return {"exported_objects": [{"class": CLASS_NAME,
                                  "cuboid_dimensions": _floats(np.asarray(model.dimensions) * CM)}]}


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=path) from None


def read_camera_settings(path) -> CameraIntrinsics:
    d = _load_json(path)
    try:
        s = d["camera_settings"][0]
        i, size = s["intrinsic_settings"], s["captured_image_size"]
        return CameraIntrinsics(float(i["fx"]), float(i["fy"]), float(i["cx"]), float(i["cy"]),
                                int(size["width"]), int(size["height"]))
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed camera settings ({exc})", path=path) from None


def read_object_settings(path) -> CuboidModel:
    d = _load_json(path)
    try:
        dims = d["exported_objects"][0]["cuboid_dimensions"]
        return CuboidModel(tuple(float(v) / CM for v in dims))
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed object settings ({exc})", path=path) from None


def read_annotation(path, k: CameraIntrinsics) -> FrameAnnotation:
    d = _load_json(path)
    try:
        objects = []
        for o in d["objects"]:
            pose = Pose6D(o["quaternion_xyzw"], np.asarray(o["location"], dtype=float) / CM,
                          "camera", "object")
            cuboid = np.vstack([np.asarray(o["cuboid"], dtype=float), [o["cuboid_centroid"]]]) / CM
            proj = np.vstack([np.asarray(o["projected_cuboid"], dtype=float), [o["projected_cuboid_centroid"]]])
            if cuboid.shape != (9, 3) or proj.shape != (9, 2):
                raise ValueError("cuboid must have 8 corners")
            objects.append(ObjectAnnotation(o["class"], pose, cuboid, proj, bool(o["visibility"])))
        cam = d.get("camera_data") or {}
        camera_pose = None
        if "location_worldframe" in cam:
            camera_pose = Pose6D(cam["quaternion_xyzw_worldframe"],
                                 np.asarray(cam["location_worldframe"], dtype=float) / CM, "world", "camera")
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed annotation ({exc})", path=path) from None
    return FrameAnnotation(k, objects, camera_pose)
