"""Belief maps and vertex-to-centroid vector fields.

Layout: channels 0-7 are the cuboid corners (declared order), channel 8 the
centroid. Vector-field channels ``2c`` and ``2c + 1`` hold the x and y
components for corner ``c``. A map cell ``(row i, col j)`` sits at input
pixel ``(j * stride, i * stride)``.

Binary interchange format (little endian)::

    offset  size  field
    0       4     magic  b"BLF1"
    4       4     uint32 map width
    8       4     uint32 map height
    12      4     uint32 channels (always 25)
    16      4     uint32 stride (input pixels per cell)
    20      ...   float32[channels][height][width], row major;
                  9 belief channels followed by 16 field channels
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .errors import ParseError
from .geometry import Keypoints2D

N_BELIEF = 9
N_FIELD = 16
MAGIC = b"BLF1"
_HEADER = struct.Struct("<4sIIII")

DEFAULT_STRIDE = 8
DEFAULT_SIGMA = 2.0
DEFAULT_THRESHOLD = 0.1
DEFAULT_ANGLE_TOLERANCE = math.radians(30.0)
MIN_CORRESPONDENCES = 4


@dataclass(frozen=True, eq=False)
class BeliefTensor:
    beliefs: np.ndarray  # (9, H, W)
    fields: np.ndarray  # (16, H, W)
    stride: int = DEFAULT_STRIDE

    def __post_init__(self):
        b = np.clip(np.asarray(self.beliefs, dtype=float), 0.0, 1.0)
        f = np.asarray(self.fields, dtype=float)
        if b.ndim != 3 or b.shape[0] != N_BELIEF:
            raise ValueError(f"beliefs must have shape (9, H, W), got {b.shape}")
        if f.shape != (N_FIELD,) + b.shape[1:]:
            raise ValueError(f"fields must have shape (16, H, W), got {f.shape}")
        object.__setattr__(self, "beliefs", b)
        object.__setattr__(self, "fields", f)
        object.__setattr__(self, "stride", int(self.stride))

    @property
    def map_height(self) -> int:
        return self.beliefs.shape[1]

    @property
    def map_width(self) -> int:
        return self.beliefs.shape[2]

    @classmethod
    def zeros(cls, map_width, map_height, stride=DEFAULT_STRIDE) -> "BeliefTensor":
        return cls(np.zeros((N_BELIEF, map_height, map_width)),
                   np.zeros((N_FIELD, map_height, map_width)), stride)

    def field_at(self, corner: int, row: int, col: int) -> np.ndarray:
        return self.fields[2 * corner:2 * corner + 2, row, col]


@dataclass(frozen=True)
class Peak:
    x: float
    y: float
    confidence: float
    row: int
    col: int


@dataclass
class PeakSet:
    channels: List[List[Peak]] = field(default_factory=lambda: [[] for _ in range(N_BELIEF)])

    def __len__(self):
        return sum(len(c) for c in self.channels)


# ---------------------------------------------------------------------------
# encoding

def encode(instances: Sequence[Keypoints2D], map_width: int, map_height: int,
           stride: int = DEFAULT_STRIDE, sigma: float = DEFAULT_SIGMA,
           field_threshold: float = DEFAULT_THRESHOLD) -> BeliefTensor:
    """Render ideal network output for the given keypoint instances.

    Each keypoint contributes a unit-peak Gaussian (``sigma`` in map cells);
    instances are merged by element-wise max. Wherever a corner's Gaussian
    is at least ``field_threshold`` and wins the max, the field holds the
    unit vector from that corner toward its instance centroid.
    """
    beliefs = np.zeros((N_BELIEF, map_height, map_width))
    fields = np.zeros((N_FIELD, map_height, map_width))
    winner = np.zeros((N_BELIEF, map_height, map_width))
    rows = np.arange(map_height)[:, None]
    cols = np.arange(map_width)[None, :]
    inv2s2 = 1.0 / (2.0 * sigma * sigma)

    for kp in instances:
        pts = kp.points / stride
        centroid = pts[8]
        for c in range(N_BELIEF):
            if not kp.present[c]:
                continue
            mx, my = pts[c]
            g = np.exp(-((cols - mx) ** 2 + (rows - my) ** 2) * inv2s2)
            takes = g > winner[c]
            beliefs[c] = np.maximum(beliefs[c], g)
            winner[c] = np.where(takes, g, winner[c])
            if c == 8:
                continue
            region = takes & (g >= field_threshold)
            d = centroid - pts[c]
            n = np.hypot(*d) if kp.present[8] else 0.0
            if n > 1e-12:
                fields[2 * c][region] = d[0] / n
                fields[2 * c + 1][region] = d[1] / n
            else:
                fields[2 * c][region] = 0.0
                fields[2 * c + 1][region] = 0.0
    return BeliefTensor(beliefs, fields, stride)


def add_spurious_peaks(t: BeliefTensor, count: int, rng, sigma: float = DEFAULT_SIGMA) -> BeliefTensor:
    """Inject ``count`` random Gaussian blobs (no vector field) into random channels."""
    beliefs = t.beliefs.copy()
    rows = np.arange(t.map_height)[:, None]
    cols = np.arange(t.map_width)[None, :]
    for _ in range(count):
        c = int(rng.integers(N_BELIEF))
        mx = rng.uniform(0, t.map_width - 1)
        my = rng.uniform(0, t.map_height - 1)
        amp = rng.uniform(0.3, 1.0)
        g = amp * np.exp(-((cols - mx) ** 2 + (rows - my) ** 2) / (2 * sigma * sigma))
        beliefs[c] = np.maximum(beliefs[c], g)
    return BeliefTensor(beliefs, t.fields, t.stride)


# ---------------------------------------------------------------------------
# peak extraction

# neighbours that precede a cell in raster order must be strictly lower,
# so a two-cell plateau yields a single peak
_BEFORE = [(-1, -1), (-1, 0), (-1, 1), (0, -1)]
_AFTER = [(0, 1), (1, -1), (1, 0), (1, 1)]


def _local_maxima(b: np.ndarray, threshold: float) -> np.ndarray:
    H, W = b.shape
    pad = np.full((H + 2, W + 2), -np.inf)
    pad[1:-1, 1:-1] = b
    mask = b >= threshold
    for dy, dx in _BEFORE:
        mask &= b > pad[1 + dy:1 + dy + H, 1 + dx:1 + dx + W]
    for dy, dx in _AFTER:
        mask &= b >= pad[1 + dy:1 + dy + H, 1 + dx:1 + dx + W]
    return mask


def _parabola(lm, c, lp):
    """Offset and log-height gain of the vertex of a parabola through 3 samples."""
    denom = lm - 2.0 * c + lp
    if not denom < 0:
        return None
    off = 0.5 * (lm - lp) / denom
    if abs(off) > 1.0:
        return None
    return off, -((lp - lm) ** 2) / (8.0 * denom)


def _one_sided(c, n, step, curvature):
    """Vertex offset and log gain from one neighbour, given the log-curvature."""
    off = (1.0 - 2.0 * (n - c) / curvature) / (2.0 * step)
    off = min(max(off, -1.0), 1.0)
    return off, -0.5 * curvature * off * off


def _refine(b, i, j, sigma=DEFAULT_SIGMA):
    """Sub-cell offset and peak height from log-parabola fits along each axis.

    Where a neighbour falls off the map, the axis is fitted one-sided using
    the curvature measured on the other axis (blobs are isotropic), or the
    nominal ``sigma`` when both axes touch the border.
    """
    H, W = b.shape
    v = b[i, j]
    lc = math.log(v)

    def log_or_none(ok, r, col):
        return math.log(b[r, col]) if ok and b[r, col] > 1e-300 else None

    axes = [(log_or_none(j > 0, i, j - 1), log_or_none(j < W - 1, i, j + 1)),
            (log_or_none(i > 0, i - 1, j), log_or_none(i < H - 1, i + 1, j))]
    fits = [None, None]
    curvature = None
    for a, (lm, lp) in enumerate(axes):
        if lm is not None and lp is not None:
            fits[a] = _parabola(lm, lc, lp)
            if fits[a] is not None and curvature is None:
                curvature = lm - 2.0 * lc + lp
    if curvature is None:
        curvature = -1.0 / (sigma * sigma)
    for a, (lm, lp) in enumerate(axes):
        if fits[a] is None:
            if lp is not None:
                fits[a] = _one_sided(lc, lp, 1.0, curvature)
            elif lm is not None:
                fits[a] = _one_sided(lc, lm, -1.0, curvature)
            else:
                fits[a] = (0.0, 0.0)
    (dx, gx), (dy, gy) = fits
    return dx, dy, v * math.exp(gx + gy)


def _centroid_offset(b, i, j, radius=2):
    H, W = b.shape
    i0, i1 = max(i - radius, 0), min(i + radius + 1, H)
    j0, j1 = max(j - radius, 0), min(j + radius + 1, W)
    win = b[i0:i1, j0:j1]
    total = win.sum()
    if total <= 0:
        return 0.0, 0.0
    rr, cc = np.mgrid[i0:i1, j0:j1]
    return float((win * cc).sum() / total - j), float((win * rr).sum() / total - i)


def extract_peaks(t: BeliefTensor, threshold: float = DEFAULT_THRESHOLD,
                  refine: str = "gaussian", sigma: float = DEFAULT_SIGMA) -> PeakSet:
    """Per-channel local maxima (3x3) at or above ``threshold``.

    ``refine="gaussian"`` fits a log-parabola through the peak and its four
    neighbours, which is exact for Gaussian blobs (``sigma`` is only used for
    peaks in a map corner); ``"centroid"`` uses the intensity-weighted mean
    over a 5x5 window.
    """
    out = PeakSet()
    xmax = t.map_width * t.stride
    ymax = t.map_height * t.stride
    for c in range(N_BELIEF):
        b = t.beliefs[c]
        peaks = []
        for i, j in zip(*np.nonzero(_local_maxima(b, threshold))):
            if refine == "gaussian":
                dx, dy, conf = _refine(b, i, j, sigma)
            elif refine == "centroid":
                dx, dy = _centroid_offset(b, i, j)
                conf = b[i, j]
            else:
                raise ValueError(f"unknown refinement {refine!r}")
            x = min(max((j + dx) * t.stride, 0.0), math.nextafter(xmax, 0))
            y = min(max((i + dy) * t.stride, 0.0), math.nextafter(ymax, 0))
            peaks.append(Peak(float(x), float(y), float(min(conf, 1.0)), int(i), int(j)))
        peaks.sort(key=lambda p: (-p.confidence, p.row, p.col))
        out.channels[c] = peaks
    return out


# ---------------------------------------------------------------------------
# instance association

def associate_instances(peaks: PeakSet, t: BeliefTensor,
                        angle_tolerance: float = DEFAULT_ANGLE_TOLERANCE,
                        min_points: int = MIN_CORRESPONDENCES) -> List[Keypoints2D]:
    """Group corner peaks with centroid peaks using the vector fields.

    Greedy: candidates are processed by confidence (descending), then angular
    error (ascending); each (instance, corner) slot keeps the first peak it
    receives.
    """
    anchors = peaks.channels[8]
    if not anchors:
        return []
    centres = np.array([[p.x, p.y] for p in anchors])

    candidates = []
    for c in range(8):
        for p in peaks.channels[c]:
            row = min(max(int(round(p.y / t.stride)), 0), t.map_height - 1)
            col = min(max(int(round(p.x / t.stride)), 0), t.map_width - 1)
            f = t.field_at(c, row, col)
            fn = float(np.hypot(*f))
            if fn < 0.5:
                continue
            d = centres - (p.x, p.y)
            dn = np.hypot(d[:, 0], d[:, 1])
            with np.errstate(invalid="ignore", divide="ignore"):
                cosang = (d @ f) / (dn * fn)
            cosang = np.where(dn > 1e-9, cosang, -np.inf)
            m = int(np.argmax(cosang))
            angle = math.acos(min(max(float(cosang[m]), -1.0), 1.0)) if np.isfinite(cosang[m]) else math.pi
            if angle <= angle_tolerance:
                candidates.append((-p.confidence, angle, c, m, p))
    candidates.sort(key=lambda e: e[:4])

    points = np.full((len(anchors), 9, 2), np.nan)
    conf = np.full((len(anchors), 9), np.nan)
    for m, a in enumerate(anchors):
        points[m, 8] = (a.x, a.y)
        conf[m, 8] = a.confidence
    for _, _, c, m, p in candidates:
        if np.isnan(conf[m, c]):
            points[m, c] = (p.x, p.y)
            conf[m, c] = p.confidence

    out = []
    for m in range(len(anchors)):
        kp = Keypoints2D(points[m], conf[m])
        if len(kp) >= min_points:
            out.append(kp)
    return out


def decode(t: BeliefTensor, threshold: float = DEFAULT_THRESHOLD,
           angle_tolerance: float = DEFAULT_ANGLE_TOLERANCE) -> List[Keypoints2D]:
    return associate_instances(extract_peaks(t, threshold), t, angle_tolerance)


# ---------------------------------------------------------------------------
# file interchange

def save_tensor(path, t: BeliefTensor) -> None:
    data = np.concatenate([t.beliefs, t.fields]).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, t.map_width, t.map_height, N_BELIEF + N_FIELD, t.stride))
        fh.write(data.tobytes(order="C"))


def load_tensor(path) -> BeliefTensor:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParseError("truncated belief tensor header", path=path)
    magic, w, h, ch, stride = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParseError(f"bad magic {magic!r}", path=path)
    if ch != N_BELIEF + N_FIELD:
        raise ParseError(f"expected {N_BELIEF + N_FIELD} channels, got {ch}", path=path)
    expected = _HEADER.size + 4 * ch * h * w
    if len(raw) != expected:
        raise ParseError(f"expected {expected} bytes, got {len(raw)}", path=path)
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(ch, h, w).astype(float)
    return BeliefTensor(data[:N_BELIEF], data[N_BELIEF:], stride)
