"""Timestamped pose streams and their text formats.

Two formats are understood:

* TUM: one sample per line, ``timestamp tx ty tz qx qy qz qw``; blank lines
  and lines starting with ``#`` are ignored.
* CSV: header ``timestamp,tx,ty,tz,qx,qy,qz,qw`` followed by one row per sample.

Translations are metres, timestamps seconds.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from ..errors import NonMonotonicTimestamps, ParseError
from ..geometry import Pose6D, invert_pose

CSV_HEADER = ["timestamp", "tx", "ty", "tz", "qx", "qy", "qz", "qw"]


@dataclass(frozen=True)
class TrajectorySample:
    timestamp: float
    pose: Pose6D
    stream: Optional[str] = None

    @property
    def position(self) -> np.ndarray:
        return self.pose.translation


def _sniff_format(path: Path, fmt: Optional[str]) -> str:
    if fmt:
        fmt = fmt.lower()
        if fmt not in ("tum", "csv"):
            raise ValueError(f"unknown trajectory format {fmt!r}")
        return fmt
    return "csv" if path.suffix.lower() == ".csv" else "tum"


def _to_sample(values, lineno, path, stream, parent, child):
    try:
        nums = [float(v) for v in values]
    except ValueError as exc:
        raise ParseError(f"non-numeric field ({exc})", line=lineno, path=path) from None
    if len(nums) != 8:
        raise ParseError(f"expected 8 fields, got {len(nums)}", line=lineno, path=path)
    if not all(np.isfinite(nums)):
        raise ParseError("non-finite value", line=lineno, path=path)
    try:
        pose = Pose6D(nums[4:8], nums[1:4], parent, child)
    except ValueError as exc:
        raise ParseError(str(exc), line=lineno, path=path) from None
    return TrajectorySample(nums[0], pose, stream)


def load_trajectory(path, fmt: Optional[str] = None, stream: Optional[str] = None,
                    parent: Optional[str] = None, child: Optional[str] = None) -> List[TrajectorySample]:
    path = Path(path)
    fmt = _sniff_format(path, fmt)
    text = path.read_text()
    stream = stream or path.stem
    samples = []
    lines = []
    if fmt == "tum":
        for lineno, line in enumerate(text.splitlines(), start=1):
            s = line.strip()
            if s and not s.startswith("#"):
                lines.append((lineno, s.split()))
    else:
        reader = csv.reader(io.StringIO(text))
        header_seen = False
        for row in reader:
            lineno = reader.line_num
            if not row or not "".join(row).strip():
                continue
            if not header_seen:
                if [h.strip() for h in row] != CSV_HEADER:
                    raise ParseError(f"expected header {','.join(CSV_HEADER)}", line=lineno, path=path)
                header_seen = True
                continue
            lines.append((lineno, row))
    for lineno, values in lines:
        sample = _to_sample(values, lineno, path, stream, parent, child)
        if samples and not sample.timestamp > samples[-1].timestamp:
            raise NonMonotonicTimestamps(
                f"{path}:{lineno}: timestamp {sample.timestamp} does not increase")
        samples.append(sample)
    return samples


def format_trajectory(samples: Iterable[TrajectorySample], fmt: str = "tum") -> str:
    out = []
    if fmt == "csv":
        out.append(",".join(CSV_HEADER))
    sep = "," if fmt == "csv" else " "
    for s in samples:
        vals = [s.timestamp, *s.pose.translation, *s.pose.rotation]
        out.append(sep.join(repr(float(v)) for v in vals))
    return "\n".join(out) + ("\n" if out else "")


def save_trajectory(path, samples: Iterable[TrajectorySample], fmt: Optional[str] = None) -> None:
    path = Path(path)
    Path(path).write_text(format_trajectory(samples, _sniff_format(path, fmt)))


def invert_stream(samples: Iterable[TrajectorySample]) -> List[TrajectorySample]:
    """Replace each pose by its inverse (object-in-camera <-> camera-in-object)."""
    return [TrajectorySample(s.timestamp, invert_pose(s.pose), s.stream) for s in samples]
