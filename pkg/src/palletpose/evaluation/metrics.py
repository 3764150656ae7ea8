"""Synchronisation, filtering, alignment and the two headline metrics."""
from __future__ import annotations

import bisect
import math
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import DegenerateConfiguration, TooFewSamples
from ..geometry import Pose6D
from .trajectory import TrajectorySample

Pair = Tuple[TrajectorySample, TrajectorySample]


def synchronize(reference: Sequence[TrajectorySample], estimate: Sequence[TrajectorySample],
                max_delta: float) -> List[Pair]:
    """Match estimates to reference samples by timestamp.

    Candidate pairs within ``max_delta`` are taken closest first (ties by
    estimate then reference time); every sample is used at most once.
    Returns ``(reference, estimate)`` pairs ordered by estimate time.
    """
    if max_delta <= 0:
        raise ValueError("max_delta must be positive")
    ref_t = [s.timestamp for s in reference]
    candidates = []
    for i, e in enumerate(estimate):
        lo = bisect.bisect_left(ref_t, e.timestamp - max_delta)
        hi = bisect.bisect_right(ref_t, e.timestamp + max_delta)
        for j in range(lo, hi):
            candidates.append((abs(ref_t[j] - e.timestamp), e.timestamp, ref_t[j], i, j))
    candidates.sort()
    used_ref, used_est = set(), set()
    matched = []
    for _, _, _, i, j in candidates:
        if i in used_est or j in used_ref:
            continue
        used_est.add(i)
        used_ref.add(j)
        matched.append((i, j))
    matched.sort()
    return [(reference[j], estimate[i]) for i, j in matched]


def lowpass_filter(samples: Sequence[TrajectorySample], alpha: float,
                   gap_reset: float = math.inf) -> List[TrajectorySample]:
    """First-order exponential smoothing of translations.

    ``y_k = alpha * x_k + (1 - alpha) * y_{k-1}``; the state restarts from the
    raw sample whenever consecutive timestamps are more than ``gap_reset``
    apart. Rotations pass through unchanged.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    out = []
    y = None
    prev_t = None
    for s in samples:
        x = s.pose.translation
        if y is None or s.timestamp - prev_t > gap_reset:
            y = np.array(x, dtype=float)
        else:
            y = alpha * x + (1.0 - alpha) * y
        prev_t = s.timestamp
        pose = Pose6D(s.pose.rotation, y, s.pose.parent, s.pose.child)
        out.append(TrajectorySample(s.timestamp, pose, s.stream))
    return out


def align_rigid(pairs: Sequence[Pair]) -> Pose6D:
    """Least-squares rotation + translation taking estimate positions onto the reference."""
    if len(pairs) < 3:
        raise DegenerateConfiguration(f"rigid alignment needs >= 3 pairs, got {len(pairs)}")
    Q = np.array([r.position for r, _ in pairs])
    P = np.array([e.position for _, e in pairs])
    return _kabsch(P, Q)


def _kabsch(P, Q) -> Pose6D:
    mp, mq = P.mean(axis=0), Q.mean(axis=0)
    Pc, Qc = P - mp, Q - mq
    sv = np.linalg.svd(Pc, compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1e-300):
        raise DegenerateConfiguration("positions are collinear")
    U, _, Vt = np.linalg.svd(Pc.T @ Qc)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return Pose6D.from_matrix(R, mq - R @ mp, "reference", "estimate")


def compute_robustness(timestamps: Sequence[float], threshold: float = 0.3) -> float:
    """Percentage of the measurement span covered by update gaps <= ``threshold``."""
    ts = list(timestamps)
    if len(ts) < 2:
        raise TooFewSamples("robustness needs at least two timestamps")
    total = ts[-1] - ts[0]
    if total <= 0:
        raise TooFewSamples("timestamps span zero time")
    detected = math.fsum(b - a for a, b in zip(ts, ts[1:]) if b - a <= threshold)
    return 100.0 * detected / total


def position_errors(pairs: Sequence[Pair], alignment: Pose6D = None) -> np.ndarray:
    est = np.array([e.position for _, e in pairs])
    ref = np.array([r.position for r, _ in pairs])
    if alignment is not None:
        est = alignment.transform_points(est)
    return np.linalg.norm(ref - est, axis=1)
