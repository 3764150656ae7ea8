"""Frame-by-frame estimation: belief tensor -> keypoints -> PnP -> pose stream.

The estimate stage has two sources. A dataset directory is turned into
ideal network output by encoding its annotations (optionally degraded with
pixel noise, spurious peaks and frame dropout). A directory of saved
belief tensors is decoded as-is.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import yaml

from . import codec
from .errors import PalletPoseError, ParseError
from .evaluation.report import EvalConfig
from .evaluation.trajectory import TrajectorySample
from .geometry import CameraIntrinsics, CuboidModel, Keypoints2D, invert_pose
from .pnp import DEFAULT_DAMPING, DEFAULT_MAX_ITERATIONS, correspondences_from_arrays, solve_pnp
from .synth.annotation import read_annotation, read_camera_settings, read_object_settings
from .synth.config import DatasetConfig
from .synth.generate import CAMERA_SETTINGS, OBJECT_SETTINGS

log = logging.getLogger(__name__)

TENSOR_SUFFIX = ".blf"
DEFAULT_PERIOD = 0.19


def _section(cls, d):
    d = dict(d or {})
    unknown = set(d) - {f.name for f in fields(cls)}
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**d)


@dataclass(frozen=True)
class CodecConfig:
    stride: int = codec.DEFAULT_STRIDE
    sigma: float = codec.DEFAULT_SIGMA
    threshold: float = codec.DEFAULT_THRESHOLD
    angle_tolerance: float = 30.0  # degrees


@dataclass(frozen=True)
class PnPConfig:
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    damping: float = DEFAULT_DAMPING


@dataclass(frozen=True)
class EstimateConfig:
    period: float = DEFAULT_PERIOD  # seconds between frames
    pixel_noise: float = 0.0        # px, std of Gaussian keypoint noise
    dropout: float = 0.0            # probability a frame yields no estimate
    spurious_peaks: int = 0         # random extra belief peaks per frame
    seed: int = 0

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("period must be positive")
        if not 0 <= self.dropout <= 1:
            raise ValueError("dropout must lie in [0, 1]")
        if self.pixel_noise < 0 or self.spurious_peaks < 0:
            raise ValueError("pixel_noise and spurious_peaks must be >= 0")


@dataclass(frozen=True)
class PipelineConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    codec: CodecConfig = field(default_factory=CodecConfig)
    pnp: PnPConfig = field(default_factory=PnPConfig)
    estimate: EstimateConfig = field(default_factory=EstimateConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d or {})
        unknown = set(d) - {"dataset", "codec", "pnp", "estimate", "eval"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        return cls(DatasetConfig.from_dict(d.get("dataset") or {}), _section(CodecConfig, d.get("codec")),
                   _section(PnPConfig, d.get("pnp")), _section(EstimateConfig, d.get("estimate")),
                   _section(EvalConfig, d.get("eval")))

    @classmethod
    def load(cls, path: Optional[str]) -> "PipelineConfig":
        if path is None:
            return cls()
        try:
            data = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ValueError(f"{path}: invalid YAML ({exc})") from None
        if data is not None and not isinstance(data, dict):
            raise ValueError(f"{path}: expected a mapping at top level")
        return cls.from_dict(data)


@dataclass
class FrameResult:
    index: int
    timestamp: float
    sample: Optional[TrajectorySample]
    reason: str = ""


def frame_index(path: Path, fallback: int) -> int:
    m = re.search(r"(\d+)$", path.stem)
    return int(m.group(1)) if m else fallback


def estimate_from_tensor(t: codec.BeliefTensor, k: CameraIntrinsics, model: CuboidModel,
                         cfg: PipelineConfig = PipelineConfig()):
    """Decode every instance and solve PnP for each; strongest centroid first."""
    instances = codec.decode(t, cfg.codec.threshold, math.radians(cfg.codec.angle_tolerance))
    instances.sort(key=lambda kp: -kp.confidences[8])
    results = []
    for kp in instances:
        present = kp.present
        cs = correspondences_from_arrays(model.vertices[present], kp.points[present])
        results.append(solve_pnp(cs, k, max_iterations=cfg.pnp.max_iterations, damping=cfg.pnp.damping))
    return results


def degrade_keypoints(points: np.ndarray, sigma: float, rng) -> np.ndarray:
    return points + rng.normal(0.0, sigma, points.shape) if sigma > 0 else points


def _frame_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(index), 0x5E]))


def _solve_frame(t, k, model, cfg, index, timestamp) -> FrameResult:
    try:
        results = estimate_from_tensor(t, k, model, cfg)
    except PalletPoseError as exc:
        return FrameResult(index, timestamp, None, f"{type(exc).__name__}: {exc}")
    if not results:
        return FrameResult(index, timestamp, None, "no instance decoded")
    pose = results[0].pose.with_frames("camera", "object")
    return FrameResult(index, timestamp, TrajectorySample(timestamp, pose, "estimate"))


@dataclass
class DatasetSource:
    directory: Path
    intrinsics: CameraIntrinsics
    model: CuboidModel
    annotations: List[Path]

    @classmethod
    def open(cls, directory) -> "DatasetSource":
        d = Path(directory)
        anns = sorted(p for p in d.glob("*.json") if not p.name.startswith("_"))
        if not anns:
            raise FileNotFoundError(f"{d}: no frame annotations found")
        k = read_camera_settings(d / CAMERA_SETTINGS) if (d / CAMERA_SETTINGS).exists() else CameraIntrinsics()
        model = read_object_settings(d / OBJECT_SETTINGS) if (d / OBJECT_SETTINGS).exists() else CuboidModel()
        return cls(d, k, model, anns)


def estimate_dataset(src: DatasetSource, cfg: PipelineConfig = PipelineConfig(),
                     limit: Optional[int] = None) -> Tuple[List[FrameResult], List[TrajectorySample]]:
    """Run the estimator over annotated frames.

    Returns per-frame results plus the ground-truth stream (camera in the
    pallet frame, one sample per frame) at the same timestamps.
    """
    est, k, model = cfg.estimate, src.intrinsics, src.model
    map_w, map_h = -(-k.width // cfg.codec.stride), -(-k.height // cfg.codec.stride)
    results, truth = [], []
    for n, path in enumerate(src.annotations[:limit]):
        index = frame_index(path, n)
        ts = index * est.period
        try:
            ann = read_annotation(path, k)
        except ParseError as exc:
            results.append(FrameResult(index, ts, None, str(exc)))
            continue
        if not ann.objects:
            results.append(FrameResult(index, ts, None, "annotation has no objects"))
            continue
        truth.append(TrajectorySample(ts, invert_pose(ann.objects[0].pose).with_frames("object", "camera"),
                                      "reference"))
        rng = _frame_rng(est.seed, index)
        if est.dropout > 0 and rng.random() < est.dropout:
            results.append(FrameResult(index, ts, None, "dropped"))
            continue
        instances = [Keypoints2D.from_points(degrade_keypoints(o.projected, est.pixel_noise, rng))
                     for o in ann.objects]
        t = codec.encode(instances, map_w, map_h, cfg.codec.stride, cfg.codec.sigma, cfg.codec.threshold)
        if est.spurious_peaks:
            t = codec.add_spurious_peaks(t, est.spurious_peaks, rng, cfg.codec.sigma)
        results.append(_solve_frame(t, k, model, cfg, index, ts))
    return results, truth


def estimate_tensors(directory, k: CameraIntrinsics, model: CuboidModel,
                     cfg: PipelineConfig = PipelineConfig(), limit: Optional[int] = None) -> List[FrameResult]:
    files = sorted(Path(directory).glob(f"*{TENSOR_SUFFIX}"))
    if not files:
        raise FileNotFoundError(f"{directory}: no *{TENSOR_SUFFIX} belief tensors found")
    results = []
    for n, path in enumerate(files[:limit]):
        index = frame_index(path, n)
        t = codec.load_tensor(path)
        results.append(_solve_frame(t, k, model, cfg, index, index * cfg.estimate.period))
    return results


def successful_samples(results: List[FrameResult]) -> List[TrajectorySample]:
    return sorted((r.sample for r in results if r.sample is not None), key=lambda s: s.timestamp)
