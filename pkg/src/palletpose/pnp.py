"""Perspective-n-point pose recovery from cuboid keypoints.

Closed-form initialisation (calibrated DLT for >= 6 non-coplanar points,
POSIT for 4-5 non-coplanar points or an ill-conditioned DLT, a homography
decomposition for coplanar points) followed by Levenberg-Marquardt on the
six pose parameters.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import BehindCamera, DegenerateConfiguration, DivergedBehindCamera, TooFewPoints
from .geometry import CameraIntrinsics, Pose6D, quat_to_matrix, rotvec_to_quat

log = logging.getLogger(__name__)

DEFAULT_MAX_ITERATIONS = 100
DEFAULT_DAMPING = 1e-3


@dataclass(frozen=True)
class Correspondence:
    object_point: tuple
    image_point: tuple
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("correspondence weight must be positive")


@dataclass(frozen=True)
class PnPResult:
    pose: Pose6D
    reprojection_rmse: float
    iterations: int
    converged: bool
    initial_rmse: float = math.nan
    initializer: str = ""


def correspondences_from_arrays(object_points, image_points, weights=None):
    X = np.asarray(object_points, dtype=float).reshape(-1, 3)
    uv = np.asarray(image_points, dtype=float).reshape(-1, 2)
    if weights is None:
        weights = np.ones(len(X))
    return [Correspondence(tuple(x), tuple(u), float(w)) for x, u, w in zip(X, uv, weights)]


def _unpack(cs: Sequence[Correspondence]):
    X = np.array([c.object_point for c in cs], dtype=float).reshape(-1, 3)
    uv = np.array([c.image_point for c in cs], dtype=float).reshape(-1, 2)
    w = np.array([c.weight for c in cs], dtype=float)
    return X, uv, w


def _weighted_rmse(R, t, X, uv, w, k: CameraIntrinsics) -> float:
    Xc = X @ R.T + t
    if not np.all(Xc[:, 2] > 0):
        raise BehindCamera("object point behind the camera")
    u = k.fx * Xc[:, 0] / Xc[:, 2] + k.cx
    v = k.fy * Xc[:, 1] / Xc[:, 2] + k.cy
    sq = (u - uv[:, 0]) ** 2 + (v - uv[:, 1]) ** 2
    return math.sqrt(float(np.sum(w * sq) / np.sum(w)))


def reprojection_error(pose: Pose6D, cs: Sequence[Correspondence], k: CameraIntrinsics) -> float:
    """Weighted RMS pixel residual of ``cs`` under ``pose`` (object-in-camera)."""
    X, uv, w = _unpack(cs)
    return _weighted_rmse(pose.matrix, pose.translation, X, uv, w, k)


# ---------------------------------------------------------------------------
# initialisers; all work on normalised image coordinates (f = 1, c = 0)

def _nearest_rotation(M):
    U, _, Vt = np.linalg.svd(M)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


def _dlt(X, xn, w):
    n = len(X)
    m = X.mean(axis=0)
    s = math.sqrt(2.0) / np.mean(np.linalg.norm(X - m, axis=1))
    Xh = np.hstack([(X - m) * s, np.ones((n, 1))])
    sw = np.sqrt(w)[:, None]
    A = np.zeros((2 * n, 12))
    A[0::2, 0:4] = Xh * sw
    A[0::2, 8:12] = -xn[:, :1] * Xh * sw
    A[1::2, 4:8] = Xh * sw
    A[1::2, 8:12] = -xn[:, 1:2] * Xh * sw
    _, sv, Vt = np.linalg.svd(A)
    if sv[-2] < 1e-8 * sv[0]:
        return None
    P = Vt[-1].reshape(3, 4)
    T = np.eye(4)
    T[:3, :3] *= s
    T[:3, 3] = -s * m
    P = P @ T
    depths = P[2, :3] @ X.T + P[2, 3]
    if np.sum(depths > 0) < n / 2:
        P = -P
    M = P[:, :3]
    scale = np.mean(np.linalg.svd(M, compute_uv=False))
    R = _nearest_rotation(M)
    return R, P[:, 3] / scale


def _posit(X, xn, iterations=200):
    """Scaled-orthographic iteration of DeMenthon & Davis."""
    X0 = X[0]
    A = X[1:] - X0
    B = np.linalg.pinv(A)
    eps = np.zeros(len(A))
    R = np.eye(3)
    Z0 = 1.0
    for _ in range(iterations):
        xp = xn[1:, 0] * (1 + eps) - xn[0, 0]
        yp = xn[1:, 1] * (1 + eps) - xn[0, 1]
        I = B @ xp
        J = B @ yp
        nI, nJ = np.linalg.norm(I), np.linalg.norm(J)
        if nI == 0 or nJ == 0:
            return None
        scale = 0.5 * (nI + nJ)
        i, j = I / nI, J / nJ
        kv = np.cross(i, j)
        kv /= np.linalg.norm(kv)
        Z0 = 1.0 / scale
        R = _nearest_rotation(np.vstack([i, j, kv]))
        new_eps = A @ R[2] / Z0
        done = np.max(np.abs(new_eps - eps)) < 1e-12
        eps = new_eps
        if done:
            break
    t = Z0 * np.array([xn[0, 0], xn[0, 1], 1.0]) - R @ X0
    return R, t


def _planar(X, xn, basis, mean):
    e1, e2 = basis[0], basis[1]
    n = np.cross(e1, e2)
    E = np.column_stack([e1, e2, n])
    ab = (X - mean) @ E[:, :2]
    rows = []
    for (a, b), (x, y) in zip(ab, xn):
        rows.append([a, b, 1, 0, 0, 0, -x * a, -x * b, -x])
        rows.append([0, 0, 0, a, b, 1, -y * a, -y * b, -y])
    _, sv, Vt = np.linalg.svd(np.asarray(rows))
    H = Vt[-1].reshape(3, 3)
    lam = math.sqrt(np.linalg.norm(H[:, 0]) * np.linalg.norm(H[:, 1]))
    H = H / lam
    if H[2, 2] < 0:
        H = -H
    r1, r2 = H[:, 0], H[:, 1]
    Rp = _nearest_rotation(np.column_stack([r1, r2, np.cross(r1, r2)]))
    R = Rp @ E.T
    t = H[:, 2] - R @ mean
    return R, t


# ---------------------------------------------------------------------------
# refinement

def _residuals_and_jacobian(R, t, X, uv, sw, k):
    RX = X @ R.T
    Xc = RX + t
    x, y, z = Xc[:, 0], Xc[:, 1], Xc[:, 2]
    r = np.empty(2 * len(X))
    r[0::2] = (k.fx * x / z + k.cx - uv[:, 0]) * sw
    r[1::2] = (k.fy * y / z + k.cy - uv[:, 1]) * sw
    du = np.column_stack([k.fx / z, np.zeros_like(z), -k.fx * x / z ** 2]) * sw[:, None]
    dv = np.column_stack([np.zeros_like(z), k.fy / z, -k.fy * y / z ** 2]) * sw[:, None]
    # d(Xc)/d(omega) = -[RX]_x for a left-multiplied increment exp(omega) R
    a, b, c = RX[:, 0], RX[:, 1], RX[:, 2]
    zero = np.zeros_like(a)
    skew = np.stack([
        np.stack([zero, c, -b], axis=1),
        np.stack([-c, zero, a], axis=1),
        np.stack([b, -a, zero], axis=1),
    ], axis=1)  # (n, 3, 3) == -[RX]_x
    J = np.empty((2 * len(X), 6))
    J[0::2, :3] = np.einsum("nj,njk->nk", du, skew)
    J[1::2, :3] = np.einsum("nj,njk->nk", dv, skew)
    J[0::2, 3:] = du
    J[1::2, 3:] = dv
    return r, J


def _cost(R, t, X, uv, sw, k):
    Xc = X @ R.T + t
    if not np.all(Xc[:, 2] > 0):
        return math.inf
    u = k.fx * Xc[:, 0] / Xc[:, 2] + k.cx
    v = k.fy * Xc[:, 1] / Xc[:, 2] + k.cy
    return float(np.sum(sw ** 2 * ((u - uv[:, 0]) ** 2 + (v - uv[:, 1]) ** 2)))


def solve_pnp(cs: Sequence[Correspondence], k: CameraIntrinsics, initial: Optional[Pose6D] = None,
              max_iterations: int = DEFAULT_MAX_ITERATIONS, damping: float = DEFAULT_DAMPING) -> PnPResult:
    """Estimate the object-in-camera pose from 2D-3D correspondences."""
    if len(cs) < 4:
        raise TooFewPoints(f"need at least 4 correspondences, got {len(cs)}")
    X, uv, w = _unpack(cs)
    sw = np.sqrt(w)
    wsum = float(np.sum(w))

    centered = X - X.mean(axis=0)
    _, spread, basis = np.linalg.svd(centered)
    if spread[1] < 1e-9 * max(spread[0], 1e-300):
        raise DegenerateConfiguration("object points are collinear")
    coplanar = spread[2] < 1e-7 * spread[0]

    if initial is not None:
        R, t = initial.matrix.copy(), initial.translation.copy()
        init_name = "given"
    else:
        xn = np.column_stack([(uv[:, 0] - k.cx) / k.fx, (uv[:, 1] - k.cy) / k.fy])
        candidates = []
        if coplanar:
            candidates.append(("homography", _planar(X, xn, basis, X.mean(axis=0))))
        else:
            if len(X) >= 6:
                candidates.append(("dlt", _dlt(X, xn, w)))
            candidates.append(("posit", _posit(X, xn)))
        scored = []
        for name, sol in candidates:
            if sol is None:
                continue
            scored.append((_cost(sol[0], sol[1], X, uv, sw, k), name, sol))
        scored = [s for s in scored if math.isfinite(s[0])]
        if not scored:
            raise DivergedBehindCamera("no initialisation places the object in front of the camera")
        scored.sort(key=lambda s: s[0])
        _, init_name, (R, t) = scored[0]
        log.debug("pnp init via %s", init_name)

    cost = _cost(R, t, X, uv, sw, k)
    if not math.isfinite(cost):
        raise DivergedBehindCamera("initial pose places object points behind the camera")
    initial_rmse = math.sqrt(cost / wsum)

    lam = damping
    converged = False
    it = 0
    # Iterate to the step-norm floor; a small RMSE change alone marks
    # convergence but is not used to stop, so equivalent problems land on
    # the same minimiser.
    while it < max_iterations:
        it += 1
        r, J = _residuals_and_jacobian(R, t, X, uv, sw, k)
        H = J.T @ J
        g = J.T @ r
        if np.linalg.matrix_rank(H) < 6:
            raise DegenerateConfiguration("normal equations are rank deficient")
        step = -np.linalg.solve(H + lam * np.diag(np.diag(H)), g)
        R_new = quat_to_matrix(rotvec_to_quat(step[:3])) @ R
        t_new = t + step[3:]
        new_cost = _cost(R_new, t_new, X, uv, sw, k)
        step_norm = float(np.linalg.norm(step))
        if new_cost < cost:
            rmse_change = math.sqrt(cost / wsum) - math.sqrt(new_cost / wsum)
            R, t, cost = R_new, t_new, new_cost
            lam /= 10.0
            converged = rmse_change < 1e-9
            if step_norm < 1e-10:
                converged = True
                break
        else:
            lam *= 10.0
            if step_norm < 1e-10 or lam > 1e12:
                converged = True
                break

    # Gauss-Newton polish: near the minimum the cost cannot resolve steps
    # below ~sqrt(eps), but the normal equations still can.
    for _ in range(3):
        r, J = _residuals_and_jacobian(R, t, X, uv, sw, k)
        step = -np.linalg.lstsq(J, r, rcond=None)[0]
        R_new = quat_to_matrix(rotvec_to_quat(step[:3])) @ R
        t_new = t + step[3:]
        new_cost = _cost(R_new, t_new, X, uv, sw, k)
        if not new_cost <= cost * (1 + 1e-12) + 1e-24:
            break
        R, t, cost = R_new, t_new, new_cost
        if np.linalg.norm(step) < 1e-14:
            break

    pose = Pose6D.from_matrix(R, t, "camera", "object")
    centroid_depth = (X.mean(axis=0) @ R.T + t)[2]
    if not centroid_depth > 0:
        raise DivergedBehindCamera("refined pose puts the object centroid behind the camera")
    return PnPResult(pose, math.sqrt(cost / wsum), it, converged, initial_rmse, init_name)

