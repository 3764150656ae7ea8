"""End-to-end evaluation of an estimated pose stream against ground truth."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import List, Sequence

import numpy as np

from ..geometry import Pose6D, compose, rotation_distance
from .metrics import align_rigid, compute_robustness, lowpass_filter, position_errors, synchronize
from .trajectory import TrajectorySample, invert_stream

ALIGNMENTS = ("none", "rigid")


@dataclass(frozen=True)
class EvalConfig:
    sync_max_delta: float = 0.02
    filter_alpha: float = 0.3
    filter_gap_reset: float = 1.0
    detection_gap_threshold: float = 0.3
    alignment: str = "rigid"
    symmetry_compensation: bool = True
    # estimates arrive as object-in-camera and are inverted to camera-in-world
    invert_estimate: bool = True
    symmetry_axis: str = "z"

    def __post_init__(self):
        if not self.sync_max_delta > 0:
            raise ValueError("sync_max_delta must be positive")
        if not self.detection_gap_threshold > 0:
            raise ValueError("detection_gap_threshold must be positive")
        if not 0 < self.filter_alpha <= 1:
            raise ValueError("filter_alpha must lie in (0, 1]")
        if self.alignment not in ALIGNMENTS:
            raise ValueError(f"alignment must be one of {ALIGNMENTS}")

    @classmethod
    def from_dict(cls, d) -> "EvalConfig":
        known = {k: v for k, v in (d or {}).items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class EvalReport:
    mean_position_error_unfiltered: float
    mean_position_error_filtered: float
    robustness_percent: float
    matched_pair_count: int
    total_duration: float
    per_pair_errors: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def summary(self) -> str:
        return (f"position error unfiltered: {100 * self.mean_position_error_unfiltered:.1f} cm\n"
                f"position error filtered:   {100 * self.mean_position_error_filtered:.1f} cm\n"
                f"robustness:                {self.robustness_percent:.1f} %")


def _half_turn(axis):
    q = np.zeros(4)
    q["xyz".index(axis)] = 1.0
    return Pose6D(q)


def fold_symmetry(pairs, axis="z"):
    """Pick, per pair, the estimate or its 180-degree twin about the pallet's vertical axis.

    Poses are camera-in-world with the pallet at the origin, so the twin is
    the estimate rotated half a turn about the world axis; the member whose
    orientation is closer to the reference wins.
    """
    flip = _half_turn(axis)
    out = []
    for ref, est in pairs:
        twin = compose(flip, est.pose)
        d0 = rotation_distance(ref.pose.rotation, est.pose.rotation)
        d1 = rotation_distance(ref.pose.rotation, twin.rotation)
        if d1 < d0:
            est = TrajectorySample(est.timestamp, twin, est.stream)
        out.append((ref, est))
    return out


def _mean(values) -> float:
    return math.fsum(values) / len(values)


def evaluate(reference: Sequence[TrajectorySample], estimate: Sequence[TrajectorySample],
             cfg: EvalConfig = EvalConfig()) -> EvalReport:
    """Mean position error (raw and low-pass filtered) and detection robustness.

    ``reference`` is camera-in-world; ``estimate`` is object-in-camera when
    ``cfg.invert_estimate`` is set, camera-in-world otherwise.
    """
    if not reference or not estimate:
        raise ValueError("both streams must be non-empty")
    est = invert_stream(estimate) if cfg.invert_estimate else list(estimate)
    pairs = synchronize(reference, est, cfg.sync_max_delta)
    if not pairs:
        raise ValueError("no estimate could be synchronised with the reference")
    if cfg.symmetry_compensation:
        pairs = fold_symmetry(pairs, cfg.symmetry_axis)

    filtered_est = lowpass_filter([e for _, e in pairs], cfg.filter_alpha, cfg.filter_gap_reset)
    filtered_pairs = [(r, f) for (r, _), f in zip(pairs, filtered_est)]

    if cfg.alignment == "rigid":
        raw_err = position_errors(pairs, align_rigid(pairs))
        filt_err = position_errors(filtered_pairs, align_rigid(filtered_pairs))
    else:
        raw_err = position_errors(pairs)
        filt_err = position_errors(filtered_pairs)

    stamps = [s.timestamp for s in estimate]
    per_pair = [
        {"timestamp": float(e.timestamp), "reference_timestamp": float(r.timestamp),
         "error_unfiltered": float(a), "error_filtered": float(b)}
        for (r, e), a, b in zip(pairs, raw_err, filt_err)
    ]
    return EvalReport(
        mean_position_error_unfiltered=_mean(raw_err),
        mean_position_error_filtered=_mean(filt_err),
        robustness_percent=compute_robustness(stamps, cfg.detection_gap_threshold),
        matched_pair_count=len(pairs),
        total_duration=float(stamps[-1] - stamps[0]),
        per_pair_errors=per_pair,
    )
