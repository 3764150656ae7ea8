"""Dataset generation settings and the three bundled presets."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Tuple

import yaml

from ..geometry import EPAL_DIMENSIONS, CameraIntrinsics

TEXTURE_MODES = ("randomized", "realistic")
LIGHTING_MODES = ("three-lights-skylight", "eight-lights-near")
BACKGROUND_MODES = ("procedural-only", "procedural-and-photo")
PRESETS = ("ndds1", "ndds2", "ndds3")


def _interval(name, value, positive=False):
    lo, hi = (float(v) for v in value)
    if not lo <= hi:
        raise ValueError(f"{name}: empty interval [{lo}, {hi}]")
    if positive and lo <= 0:
        raise ValueError(f"{name}: lower bound must be positive")
    return (lo, hi)


@dataclass(frozen=True)
class DatasetConfig:
    num_images: int = 50000
    azimuth_range: Tuple[float, float] = (-90.0, 90.0)      # degrees
    altitude_range: Tuple[float, float] = (1.0, 25.0)       # degrees
    distance_range: Tuple[float, float] = (2.5, 5.5)        # metres
    pallet_texture: str = "realistic"
    lighting: str = "eight-lights-near"
    background: str = "procedural-and-photo"
    distractors: bool = True
    camera_wiggle: bool = True
    wiggle_magnitude: float = 5.0                           # degrees, per axis
    seed: int = 0
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    pallet_dimensions: Tuple[float, float, float] = EPAL_DIMENSIONS
    background_photo_dir: Optional[str] = None
    pallet_tilt: float = 0.0                                # degrees; 0 keeps the pallet level
    distractor_count: Tuple[int, int] = (1, 8)
    distractor_size: Tuple[float, float] = (0.1, 0.8)
    distractor_radius: float = 6.0
    max_attempts: int = 100
    name: str = "custom"

    def __post_init__(self):
        if int(self.num_images) < 1:
            raise ValueError("num_images must be >= 1")
        object.__setattr__(self, "num_images", int(self.num_images))
        object.__setattr__(self, "azimuth_range", _interval("azimuth_range", self.azimuth_range))
        object.__setattr__(self, "altitude_range", _interval("altitude_range", self.altitude_range))
        object.__setattr__(self, "distance_range",
                           _interval("distance_range", self.distance_range, positive=True))
        object.__setattr__(self, "distractor_size",
                           _interval("distractor_size", self.distractor_size, positive=True))
        lo, hi = (int(v) for v in self.distractor_count)
        if not 0 <= lo <= hi:
            raise ValueError("distractor_count must be a non-empty range of counts")
        object.__setattr__(self, "distractor_count", (lo, hi))
        object.__setattr__(self, "pallet_dimensions", tuple(float(d) for d in self.pallet_dimensions))
        if not (-90 < self.altitude_range[0] and self.altitude_range[1] < 90):
            raise ValueError("altitude must stay strictly between -90 and 90 degrees")
        for name, allowed in (("pallet_texture", TEXTURE_MODES), ("lighting", LIGHTING_MODES),
                              ("background", BACKGROUND_MODES)):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.wiggle_magnitude < 0 or self.pallet_tilt < 0:
            raise ValueError("wiggle_magnitude and pallet_tilt are magnitudes (>= 0)")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if isinstance(self.intrinsics, dict):
            object.__setattr__(self, "intrinsics", CameraIntrinsics(**self.intrinsics))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        base = d.pop("preset", None)
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown dataset config keys: {sorted(unknown)}")
        for key in ("azimuth_range", "altitude_range", "distance_range", "distractor_count",
                    "distractor_size", "pallet_dimensions"):
            if key in d:
                d[key] = tuple(d[key])
        cfg = preset(base) if base else cls()
        return replace(cfg, **d) if d else cfg

    @classmethod
    def from_yaml(cls, path) -> "DatasetConfig":
        data = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: expected a mapping at top level")
        return cls.from_dict(data.get("dataset", data))

    def with_overrides(self, **kw) -> "DatasetConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_PRESETS = {
    "ndds1": dict(name="ndds1", num_images=50000, azimuth_range=(-90, 90), altitude_range=(1, 35),
                  distance_range=(3.5, 4.0), pallet_texture="randomized",
                  lighting="three-lights-skylight", background="procedural-only",
                  distractors=False, camera_wiggle=False),
    "ndds2": dict(name="ndds2", num_images=100000, azimuth_range=(-180, 180), altitude_range=(5, 25),
                  distance_range=(3.0, 3.5), pallet_texture="realistic",
                  lighting="three-lights-skylight", background="procedural-and-photo",
                  distractors=False, camera_wiggle=False),
    "ndds3": dict(name="ndds3", num_images=50000, azimuth_range=(-90, 90), altitude_range=(1, 25),
                  distance_range=(2.5, 5.5), pallet_texture="realistic",
                  lighting="eight-lights-near", background="procedural-and-photo",
                  distractors=True, camera_wiggle=True, wiggle_magnitude=5.0),
}


def preset(name: str) -> DatasetConfig:
    try:
        return DatasetConfig(**_PRESETS[name.lower()])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}") from None


def bundled_config_path(name: str) -> Path:
    """Path of a YAML file shipped in ``palletpose/configs``."""
    ref = resources.files("palletpose.configs").joinpath(f"{name.lower()}.yaml")
    return Path(str(ref))
