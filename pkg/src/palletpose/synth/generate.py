"""Write a synthetic dataset to disk.

Every frame is a pure function of ``(config, frame index)``: its generator
is seeded from ``SeedSequence([seed, index, attempt])``, so output does
not depend on worker count or on which frames were generated before.
"""
from __future__ import annotations

import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
from PIL import Image

from ..errors import SceneRejection
from ..geometry import CuboidModel
from .annotation import annotate_frame, annotation_to_dict, camera_settings, check_consistency, dumps, object_settings
from .config import DatasetConfig
from .render import render_frame
from .scene import compose_scene

log = logging.getLogger(__name__)

MANIFEST = "_manifest.json"
CAMERA_SETTINGS = "_camera_settings.json"
OBJECT_SETTINGS = "_object_settings.json"
MAX_FRAME_ATTEMPTS = 10


@dataclass
class FrameRecord:
    index: int
    image: str
    annotation: str
    seed: List[int]
    attempts: int
    azimuth: float
    altitude: float
    distance: float
    wiggle: List[float]


@dataclass
class DatasetManifest:
    config: dict
    frames: List[FrameRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"config": self.config, "frame_count": len(self.frames),
                "frames": [vars(f) for f in self.frames]}

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        d = json.loads(Path(path).read_text())
        return cls(d["config"], [FrameRecord(**f) for f in d["frames"]])


def frame_seed(seed: int, index: int, attempt: int) -> List[int]:
    return [int(seed) & (2**64 - 1), int(index), int(attempt)]


def make_frame(cfg: DatasetConfig, index: int, render: bool = True):
    """Build one frame; returns ``(png_bytes or None, annotation_json, FrameRecord)``."""
    model = CuboidModel(cfg.pallet_dimensions)
    for attempt in range(MAX_FRAME_ATTEMPTS):
        seed = frame_seed(cfg.seed, index, attempt)
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        try:
            scene = compose_scene(cfg, rng, model)
            ann = annotate_frame(scene, cfg.intrinsics, model)
            break
        except SceneRejection as exc:
            log.info("frame %d attempt %d rejected: %s", index, attempt, exc)
    else:
        raise SceneRejection(f"frame {index}: {MAX_FRAME_ATTEMPTS} scenes rejected")
    check_consistency(ann, model)
    text = dumps(annotation_to_dict(ann))
    png = None
    if render:
        buf = io.BytesIO()
        Image.fromarray(render_frame(scene, cfg.intrinsics)).save(buf, format="PNG", compress_level=3)
        png = buf.getvalue()
    name = f"{index:06d}"
    rec = FrameRecord(index, f"{name}.png", f"{name}.json", seed, attempt + 1,
                      scene.orbit.azimuth, scene.orbit.altitude, scene.orbit.distance, list(scene.wiggle))
    return png, text, rec


def _job(args):
    return make_frame(*args)


def generate_dataset(cfg: DatasetConfig, out_dir, limit: Optional[int] = None, workers: int = 1,
                     render: bool = True, progress=None) -> DatasetManifest:
    """Generate ``min(limit, cfg.num_images)`` frames into ``out_dir``.

    Writes ``NNNNNN.png`` / ``NNNNNN.json`` per frame, the two settings
    files and ``_manifest.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = cfg.num_images if limit is None else min(int(limit), cfg.num_images)
    if count < 1:
        raise ValueError("limit must be >= 1")
    model = CuboidModel(cfg.pallet_dimensions)
    (out / CAMERA_SETTINGS).write_text(dumps(camera_settings(cfg.intrinsics)))
    (out / OBJECT_SETTINGS).write_text(dumps(object_settings(model)))

    manifest = DatasetManifest(cfg.to_dict())
    jobs = ((cfg, i, render) for i in range(count))
    if workers > 1:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_job, jobs, chunksize=8)
    else:
        pool = None
        results = map(_job, jobs)
    try:
        for png, text, rec in results:
            if png is not None:
                (out / rec.image).write_bytes(png)
            (out / rec.annotation).write_text(text)
            manifest.frames.append(rec)
            if progress:
                progress(rec.index + 1, count)
    finally:
        if pool:
            pool.shutdown()
    (out / MANIFEST).write_text(dumps(manifest.to_dict()))
    return manifest
