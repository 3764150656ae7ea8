"""Random scene composition: orbiting camera, lights, background, distractors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from ..errors import BehindCamera, SceneRejection
from ..geometry import (CuboidModel, Pose6D, axis_angle_to_quat, compose, euler_rotation,
                        invert_pose, look_at, project_cuboid, quat_to_matrix)
from .config import DatasetConfig

PHOTO_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")
PATTERNS = ("solid", "checker", "stripes", "waves", "gradient")
PRIMITIVES = ("box", "sphere", "cylinder")


@dataclass(frozen=True)
class OrbitSample:
    """Pre-wiggle orbit coordinates of the camera in the pallet frame."""

    azimuth: float    # degrees
    altitude: float   # degrees
    distance: float   # metres


@dataclass(frozen=True)
class Light:
    position: Tuple[float, float, float]
    intensity: float
    color: Tuple[float, float, float] = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class Distractor:
    kind: str
    pose: Pose6D                      # world <- primitive
    size: Tuple[float, float, float]  # extents in metres
    color: Tuple[float, float, float]

    @property
    def bounding_radius(self) -> float:
        return 0.5 * float(np.linalg.norm(self.size))


@dataclass(frozen=True, eq=False)
class SceneSpec:
    pallet_poses: List[Pose6D]
    camera_pose: Pose6D
    lights: List[Light]
    ambient: float
    skylight: float
    background: dict
    distractors: List[Distractor] = field(default_factory=list)
    pallet_texture: dict = field(default_factory=dict)
    texture_seed: int = 0
    orbit: Optional[OrbitSample] = None
    wiggle: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    pallet_dimensions: Tuple[float, float, float] = (1.2, 0.8, 0.144)

    def object_in_camera(self, index: int = 0) -> Pose6D:
        return compose(invert_pose(self.camera_pose), self.pallet_poses[index])


def _rot(axis, deg):
    return quat_to_matrix(axis_angle_to_quat(axis, math.radians(deg)))


def orbit_pose(azimuth, altitude, distance, pallet: Pose6D = None,
               wiggle=(0.0, 0.0, 0.0)) -> Pose6D:
    """Camera-in-world pose on the orbit around ``pallet`` (identity when omitted).

    Azimuth 0 puts the camera on the pallet's -y side; altitude is measured
    from the pallet's xy plane. ``wiggle`` = (yaw, pitch, roll) in degrees,
    applied in the camera frame after aiming at the centroid.
    """
    pallet = pallet if pallet is not None else Pose6D.identity("world", "object")
    a, e = math.radians(azimuth), math.radians(altitude)
    local = distance * np.array([math.sin(a) * math.cos(e), -math.cos(a) * math.cos(e), math.sin(e)])
    eye = pallet.transform_points(local)
    R = look_at(eye, pallet.translation)
    yaw, pitch, roll = wiggle
    if yaw or pitch or roll:
        R = R @ _rot((0, 1, 0), yaw) @ _rot((1, 0, 0), pitch) @ _rot((0, 0, 1), roll)
    return Pose6D.from_matrix(R, eye, "world", "camera")


def sample_orbit_pose(cfg: DatasetConfig, rng: np.random.Generator, pallet: Pose6D = None):
    """Draw an orbit pose; returns ``(camera_in_world, OrbitSample, wiggle)``."""
    sample = OrbitSample(float(rng.uniform(*cfg.azimuth_range)),
                         float(rng.uniform(*cfg.altitude_range)),
                         float(rng.uniform(*cfg.distance_range)))
    wiggle = (0.0, 0.0, 0.0)
    if cfg.camera_wiggle and cfg.wiggle_magnitude > 0:
        m = cfg.wiggle_magnitude
        wiggle = tuple(float(v) for v in rng.uniform(-m, m, 3))
    pose = orbit_pose(sample.azimuth, sample.altitude, sample.distance, pallet, wiggle)
    return pose, sample, wiggle


def sample_pallet_pose(cfg: DatasetConfig, rng) -> Pose6D:
    """Pallet lying on the ground plane, centroid above the world origin, random yaw."""
    yaw = math.radians(rng.uniform(-180.0, 180.0))
    roll = pitch = 0.0
    if cfg.pallet_tilt > 0:
        roll, pitch = (math.radians(v) for v in rng.uniform(-cfg.pallet_tilt, cfg.pallet_tilt, 2))
    R = euler_rotation(roll, pitch, yaw)
    return Pose6D.from_matrix(R, [0.0, 0.0, cfg.pallet_dimensions[2] / 2], "world", "object")


def _color(rng, lo=0.0, hi=1.0):
    return tuple(float(c) for c in rng.uniform(lo, hi, 3))


def _sample_lights(cfg, rng, center):
    if cfg.lighting == "three-lights-skylight":
        n, radius, skylight = 3, 8.0, float(rng.uniform(0.2, 0.5))
    else:
        n, radius, skylight = 8, 3.0, 0.0
    lights = []
    for _ in range(n):
        # uniform in the upper half-ball around the pallet
        while True:
            p = rng.uniform(-1.0, 1.0, 3)
            if p @ p <= 1.0:
                break
        p[2] = abs(p[2])
        pos = center + radius * p
        lights.append(Light(tuple(float(v) for v in pos), float(rng.uniform(0.3, 1.5)),
                            _color(rng, 0.75, 1.0)))
    return lights, skylight


def _pattern(rng, realistic=False):
    if realistic:
        base = np.array([0.62, 0.47, 0.30]) * rng.uniform(0.8, 1.15)
        return {"kind": "wood", "color": [float(c) for c in np.clip(base + rng.normal(0, 0.03, 3), 0, 1)],
                "grain": float(rng.uniform(40.0, 90.0)), "contrast": float(rng.uniform(0.08, 0.2)),
                "warp": float(rng.uniform(0.5, 2.5)), "block_shade": float(rng.uniform(0.8, 0.95))}
    kind = PATTERNS[int(rng.integers(len(PATTERNS)))]
    return {"kind": kind, "color": list(_color(rng)), "color2": list(_color(rng)),
            "scale": float(rng.uniform(2.0, 30.0)), "angle": float(rng.uniform(0.0, math.pi))}


def _list_photos(directory) -> List[str]:
    if not directory:
        return []
    d = Path(directory)
    if not d.is_dir():
        return []
    return sorted(str(p) for p in d.iterdir() if p.suffix.lower() in PHOTO_SUFFIXES)


def _sample_background(cfg, rng):
    if cfg.background == "procedural-and-photo":
        photos = _list_photos(cfg.background_photo_dir)
        use_photo = rng.random() < 0.5
        if photos and use_photo:
            return {"kind": "photo", "path": photos[int(rng.integers(len(photos)))]}
    return _pattern(rng)


def _segment_distance(p, a, b):
    ab = b - a
    s = np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + s * ab)))


def _sample_distractors(cfg, rng, camera: Pose6D, pallet: Pose6D, guard=0.1):
    lo, hi = cfg.distractor_count
    n = int(rng.integers(lo, hi + 1))
    eye, centroid = camera.translation, pallet.translation
    pallet_radius = 0.5 * math.hypot(*cfg.pallet_dimensions[:2])
    out = []
    for _ in range(n):
        kind = PRIMITIVES[int(rng.integers(len(PRIMITIVES)))]
        ext = rng.uniform(*cfg.distractor_size, 3)
        if kind == "sphere":
            ext[:] = ext[0]
        elif kind == "cylinder":
            ext[1] = ext[0]
        size = tuple(float(v) for v in ext)
        radius = 0.5 * float(np.linalg.norm(ext))
        for _ in range(50):
            r = cfg.distractor_radius * math.sqrt(rng.random())
            phi = rng.uniform(0.0, 2 * math.pi)
            c = np.array([r * math.cos(phi), r * math.sin(phi), ext[2] / 2])
            if math.hypot(c[0] - centroid[0], c[1] - centroid[1]) < pallet_radius + radius + guard:
                continue
            if _segment_distance(c, eye, centroid) < radius + guard:
                continue
            yaw = rng.uniform(-math.pi, math.pi)
            pose = Pose6D(axis_angle_to_quat((0, 0, 1), yaw), c, "world", kind)
            out.append(Distractor(kind, pose, size, _color(rng)))
            break
    return out


def compose_scene(cfg: DatasetConfig, rng: np.random.Generator, cuboid: CuboidModel = None) -> SceneSpec:
    """Draw a complete scene whose primary pallet is fully inside the image.

    The camera pose is resampled up to ``cfg.max_attempts`` times; after
    that :class:`SceneRejection` is raised.
    """
    cuboid = cuboid or CuboidModel(cfg.pallet_dimensions)
    pallet = sample_pallet_pose(cfg, rng)
    for _ in range(cfg.max_attempts):
        camera, orbit, wiggle = sample_orbit_pose(cfg, rng, pallet)
        try:
            _, inside = project_cuboid(cfg.intrinsics, compose(invert_pose(camera), pallet), cuboid)
        except BehindCamera:
            continue
        if inside:
            break
    else:
        raise SceneRejection(f"no fully visible camera pose after {cfg.max_attempts} attempts")

    lights, skylight = _sample_lights(cfg, rng, pallet.translation)
    ambient = float(rng.uniform(0.1, 0.3))
    background = _sample_background(cfg, rng)
    texture = _pattern(rng, realistic=cfg.pallet_texture == "realistic")
    distractors = _sample_distractors(cfg, rng, camera, pallet) if cfg.distractors else []
    return SceneSpec(
        pallet_poses=[pallet], camera_pose=camera, lights=lights, ambient=ambient, skylight=skylight,
        background=background, distractors=distractors, pallet_texture=texture,
        texture_seed=int(rng.integers(2**31)), orbit=orbit, wiggle=wiggle,
        pallet_dimensions=tuple(cuboid.dimensions),
    )
