"""Rigid transforms, pinhole projection and the pallet cuboid.

Conventions
-----------
* Quaternions are stored as ``(x, y, z, w)`` and kept unit-norm with ``w >= 0``.
* A :class:`Pose6D` with frames ``(parent, child)`` maps child coordinates into
  the parent frame: ``p_parent = R @ p_child + t``.
* Camera frame: x right, y down, z forward (optical axis).
* Cuboid corner ``i`` has sign pattern ``i = 4*[x<0] + 2*[y<0] + [z<0]``; the
  centroid is appended as the ninth point (index 8).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np

from .errors import BehindCamera, FrameMismatch

# EPAL 1 footprint is 1200 x 800 mm; overall height 144 mm (22 + 78 + 22 + 22).
EPAL_DIMENSIONS = (1.200, 0.800, 0.144)

_AXES = {"x": 0, "y": 1, "z": 2}


# ---------------------------------------------------------------------------
# quaternion helpers

def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float).reshape(4)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n == 0.0:
        raise ValueError(f"cannot normalize quaternion {q}")
    q = q / n
    # canonical hemisphere: w >= 0, ties broken on the first non-zero component
    if q[3] < 0.0:
        q = -q
    elif q[3] == 0.0:
        nz = np.flatnonzero(q[:3])
        if nz.size and q[nz[0]] < 0.0:
            q = -q
    return q


def quat_multiply(a, b) -> np.ndarray:
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array([
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
        aw * bw - ax * bx - ay * by - az * bz,
    ])


def quat_conjugate(q) -> np.ndarray:
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_to_matrix(q) -> np.ndarray:
    x, y, z, w = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(R) -> np.ndarray:
    """Rotation matrix to (x, y, z, w), Shepperd's method."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [(R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s, 0.25 * s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s, (R[2, 1] - R[1, 2]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s, (R[0, 2] - R[2, 0]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s, (R[1, 0] - R[0, 1]) / s]
    return quat_normalize(q)


def axis_angle_to_quat(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    s = math.sin(angle / 2.0)
    return quat_normalize([axis[0] * s, axis[1] * s, axis[2] * s, math.cos(angle / 2.0)])


def rotvec_to_quat(rv) -> np.ndarray:
    rv = np.asarray(rv, dtype=float)
    theta = float(np.linalg.norm(rv))
    if theta < 1e-12:
        # first-order expansion keeps tiny increments exact enough
        return quat_normalize([rv[0] / 2, rv[1] / 2, rv[2] / 2, 1.0])
    return axis_angle_to_quat(rv / theta, theta)


def quat_angle(q) -> float:
    """Rotation angle in [0, pi] of a unit quaternion."""
    q = np.asarray(q, dtype=float)
    return 2.0 * math.atan2(float(np.linalg.norm(q[:3])), abs(float(q[3])))


def rotation_distance(qa, qb) -> float:
    """Geodesic angle between two orientations (radians)."""
    return quat_angle(quat_multiply(quat_conjugate(qa), qb))


# ---------------------------------------------------------------------------
# poses

@dataclass(frozen=True, eq=False)
class Pose6D:
    """Rigid transform mapping ``child`` coordinates into ``parent``."""

    rotation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    parent: Optional[str] = None
    child: Optional[str] = None

    def __post_init__(self):
        q = quat_normalize(self.rotation)
        t = np.array(self.translation, dtype=float).reshape(3)
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, parent=None, child=None) -> "Pose6D":
        return cls(parent=parent, child=child)

    @classmethod
    def from_matrix(cls, R, t, parent=None, child=None) -> "Pose6D":
        return cls(matrix_to_quat(R), t, parent, child)

    @classmethod
    def from_homogeneous(cls, T, parent=None, child=None) -> "Pose6D":
        T = np.asarray(T, dtype=float)
        return cls.from_matrix(T[:3, :3], T[:3, 3], parent, child)

    @cached_property
    def matrix(self) -> np.ndarray:
        R = quat_to_matrix(self.rotation)
        R.setflags(write=False)
        return R

    def homogeneous(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.matrix
        T[:3, 3] = self.translation
        return T

    def transform_points(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=float)
        return P @ self.matrix.T + self.translation

    def with_frames(self, parent=None, child=None) -> "Pose6D":
        return Pose6D(self.rotation, self.translation, parent, child)

    def __repr__(self):
        q = np.array2string(self.rotation, precision=6)
        t = np.array2string(self.translation, precision=6)
        return f"Pose6D(q={q}, t={t}, {self.parent}->{self.child})"


def _check_chain(a_frame, b_frame, what):
    if a_frame is not None and b_frame is not None and a_frame != b_frame:
        raise FrameMismatch(f"{what}: '{a_frame}' != '{b_frame}'")


def compose(a: Pose6D, b: Pose6D) -> Pose6D:
    """``a`` (A<-B) composed with ``b`` (B<-C) gives A<-C."""
    _check_chain(a.child, b.parent, "compose")
    q = quat_multiply(a.rotation, b.rotation)
    t = a.matrix @ b.translation + a.translation
    # an unframed operand inherits the frames of the other one
    parent = a.parent if (a.parent, a.child) != (None, None) else b.parent
    child = b.child if (b.parent, b.child) != (None, None) else a.child
    return Pose6D(q, t, parent, child)


def invert_pose(p: Pose6D) -> Pose6D:
    q = quat_conjugate(p.rotation)
    t = -(p.matrix.T @ p.translation)
    return Pose6D(q, t, p.child, p.parent)


def _half_turn(axis: str) -> np.ndarray:
    q = np.zeros(4)
    q[_AXES[axis]] = 1.0
    return q


def yaw_flip(p: Pose6D, axis: str = "z") -> Pose6D:
    """Rotate the child (object) frame by 180 degrees about its symmetry axis.

    The translation is unchanged; only the orientation moves to the other
    member of the object's two-fold symmetry pair.
    """
    return Pose6D(quat_multiply(p.rotation, _half_turn(axis)), p.translation, p.parent, p.child)


def symmetric_pose_distance(a: Pose6D, b: Pose6D, axis: str = "z") -> Tuple[float, float]:
    """Position error (m) and symmetry-folded rotation error (rad)."""
    _check_chain(a.parent, b.parent, "symmetric_pose_distance parent")
    _check_chain(a.child, b.child, "symmetric_pose_distance child")
    pos = float(np.linalg.norm(a.translation - b.translation))
    rot = min(rotation_distance(a.rotation, b.rotation),
              rotation_distance(a.rotation, yaw_flip(b, axis).rotation))
    return pos, rot


# ---------------------------------------------------------------------------
# camera and cuboid

@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float = 600.0
    fy: float = 600.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class CuboidModel:
    """Axis-aligned box centred on the object origin."""

    dimensions: Tuple[float, float, float] = EPAL_DIMENSIONS

    def __post_init__(self):
        dims = tuple(float(d) for d in self.dimensions)
        if len(dims) != 3 or min(dims) <= 0:
            raise ValueError(f"invalid cuboid dimensions {self.dimensions}")
        object.__setattr__(self, "dimensions", dims)

    @classmethod
    def pallet(cls, dimensions=EPAL_DIMENSIONS) -> "CuboidModel":
        return cls(tuple(dimensions))

    @cached_property
    def vertices(self) -> np.ndarray:
        """(9, 3): eight corners in declared order, then the centroid."""
        half = np.asarray(self.dimensions) / 2.0
        corners = np.empty((8, 3))
        for i in range(8):
            sx = -1.0 if i & 4 else 1.0
            sy = -1.0 if i & 2 else 1.0
            sz = -1.0 if i & 1 else 1.0
            corners[i] = (sx * half[0], sy * half[1], sz * half[2])
        out = np.vstack([corners, corners.mean(axis=0)])
        out.setflags(write=False)
        return out

    @property
    def corners(self) -> np.ndarray:
        return self.vertices[:8]

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices[8]


def dimensions_from_vertices(vertices) -> Tuple[float, float, float]:
    """Recover (dx, dy, dz) from corners in the declared order."""
    v = np.asarray(vertices, dtype=float)
    return (float(v[0, 0] - v[4, 0]), float(v[0, 1] - v[2, 1]), float(v[0, 2] - v[1, 2]))


@dataclass(frozen=True, eq=False)
class Keypoints2D:
    """Nine image keypoints (8 corners + centroid); missing entries are NaN."""

    points: np.ndarray
    confidences: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(9, 2)
        conf = np.array(self.confidences, dtype=float).reshape(9)
        pt_present = ~np.isnan(pts).any(axis=1)
        if not np.array_equal(pt_present, ~np.isnan(conf)):
            raise ValueError("a confidence must be present exactly when its point is")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "confidences", conf)

    @classmethod
    def empty(cls) -> "Keypoints2D":
        return cls(np.full((9, 2), np.nan), np.full(9, np.nan))

    @classmethod
    def from_points(cls, points, confidence: float = 1.0) -> "Keypoints2D":
        pts = np.asarray(points, dtype=float).reshape(9, 2)
        conf = np.where(np.isnan(pts).any(axis=1), np.nan, confidence)
        return cls(pts, conf)

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.confidences)

    def __len__(self):
        return int(self.present.sum())


def project_point(k: CameraIntrinsics, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if not p[2] > 0:
        raise BehindCamera(f"point {p} has non-positive depth")
    return np.array([k.fx * p[0] / p[2] + k.cx, k.fy * p[1] / p[2] + k.cy])


def project_points(k: CameraIntrinsics, P) -> np.ndarray:
    P = np.asarray(P, dtype=float).reshape(-1, 3)
    if not np.all(P[:, 2] > 0):
        raise BehindCamera("at least one point has non-positive depth")
    return np.column_stack([k.fx * P[:, 0] / P[:, 2] + k.cx, k.fy * P[:, 1] / P[:, 2] + k.cy])


def inside_image(k: CameraIntrinsics, uv) -> bool:
    uv = np.asarray(uv, dtype=float).reshape(-1, 2)
    return bool(np.all((uv[:, 0] >= 0) & (uv[:, 0] < k.width) & (uv[:, 1] >= 0) & (uv[:, 1] < k.height)))


def project_cuboid(k: CameraIntrinsics, object_pose: Pose6D, cuboid: CuboidModel):
    """Project the 9 cuboid points; returns ``(Keypoints2D, fully_inside)``."""
    cam_pts = object_pose.transform_points(cuboid.vertices)
    uv = project_points(k, cam_pts)
    return Keypoints2D.from_points(uv), inside_image(k, uv)


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera-to-world rotation for an x-right / y-down / z-forward camera."""
    eye = np.asarray(eye, dtype=float)
    f = np.asarray(target, dtype=float) - eye
    f /= np.linalg.norm(f)
    x = np.cross(f, up)
    nx = np.linalg.norm(x)
    if nx < 1e-9:
        raise ValueError("viewing direction parallel to the up vector")
    x /= nx
    y = np.cross(f, x)
    return np.column_stack([x, y, f])


def euler_rotation(roll=0.0, pitch=0.0, yaw=0.0) -> np.ndarray:
    """Rz(yaw) @ Ry(pitch) @ Rx(roll), angles in radians."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx
