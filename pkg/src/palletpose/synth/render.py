"""Small deterministic software rasteriser for synthetic frames.

Triangles are z-buffered one at a time with perspective-correct
barycentrics written to a deferred buffer; shading (Lambertian point
lights + ambient + optional skylight) and texturing then run once per
covered pixel. Triangles crossing the near plane are dropped rather than
clipped; scenes keep geometry well in front of the camera.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from PIL import Image

from ..geometry import CameraIntrinsics
from .mesh import Mesh, box_mesh, cylinder_mesh, merge, pallet_mesh, sphere_mesh
from .scene import SceneSpec

NEAR = 0.05
BLOCK_PARTS = range(3, 12)
STRINGER_PARTS = range(12, 15)


@lru_cache(maxsize=None)
def _unit_primitive(kind) -> Mesh:
    if kind == "box":
        return box_mesh((0, 0, 0), (1, 1, 1))
    if kind == "sphere":
        return sphere_mesh(0.5, n_lat=6, n_lon=10)
    if kind == "cylinder":
        return cylinder_mesh(0.5, 1.0, n=12)
    raise ValueError(f"unknown primitive {kind!r}")


def _primitive(d) -> Mesh:
    m = _unit_primitive(d.kind)
    return Mesh(m.vertices * np.asarray(d.size), m.faces, m.parts)


def pattern_color(desc: dict, s, t, parts=None, texture_seed=0) -> np.ndarray:
    """Evaluate a procedural texture at surface coordinates ``(s, t)``; returns (N, 3)."""
    kind = desc.get("kind", "solid")
    c1 = np.asarray(desc.get("color", (0.5, 0.5, 0.5)), dtype=float)
    if kind == "solid":
        return np.broadcast_to(c1, (len(s), 3)).copy()
    if kind == "wood":
        parts = np.zeros(len(s), dtype=int) if parts is None else parts
        jitter = np.random.default_rng(texture_seed).uniform(0.9, 1.1, (32, 3))
        across = np.where(np.isin(parts, STRINGER_PARTS), s, t)
        along = np.where(np.isin(parts, STRINGER_PARTS), t, s)
        phase = desc["grain"] * (across + 0.02 * np.sin(2 * math.pi * desc["warp"] * along))
        shade = 1.0 - desc["contrast"] * (0.5 + 0.5 * np.sin(phase))
        shade = shade * np.where(np.isin(parts, BLOCK_PARTS), desc["block_shade"], 1.0)
        return np.clip(c1 * jitter[parts % 32] * shade[:, None], 0.0, 1.0)
    c2 = np.asarray(desc.get("color2", (0.0, 0.0, 0.0)), dtype=float)
    scale, angle = desc.get("scale", 8.0), desc.get("angle", 0.0)
    q = s * math.cos(angle) + t * math.sin(angle)
    if kind == "checker":
        w = (np.floor(s * scale) + np.floor(t * scale)) % 2
    elif kind == "stripes":
        w = np.floor(q * scale) % 2
    elif kind == "waves":
        r = -s * math.sin(angle) + t * math.cos(angle)
        w = 0.5 + 0.5 * np.sin(2 * math.pi * scale * q) * np.sin(math.pi * scale * r)
    elif kind == "gradient":
        w = np.clip(q, 0.0, 1.0)
    else:
        raise ValueError(f"unknown pattern {kind!r}")
    return (1.0 - w)[:, None] * c1 + w[:, None] * c2


@lru_cache(maxsize=4)
def _load_photo(path, width, height) -> np.ndarray:
    with Image.open(path) as im:
        im = im.convert("RGB").resize((width, height), Image.BILINEAR)
        return np.asarray(im, dtype=float) / 255.0


def render_background(desc: dict, width: int, height: int) -> np.ndarray:
    if desc.get("kind") == "photo":
        return _load_photo(desc["path"], width, height).copy()
    v, u = np.mgrid[0:height, 0:width]
    s, t = (u / width).ravel(), (v / width).ravel()
    return pattern_color(desc, s, t).reshape(height, width, 3)


def _scene_triangles(scene: SceneSpec):
    """World triangles, local (object-space) triangles, material and part per face."""
    world, local, material, parts = [], [], [], []
    pallet = pallet_mesh(scene.pallet_dimensions)
    for m_id, pose in enumerate(scene.pallet_poses):
        tri = pallet.triangles
        local.append(tri)
        world.append(tri @ pose.matrix.T + pose.translation)
        material.append(np.full(len(tri), m_id))
        parts.append(pallet.parts)
    base = len(scene.pallet_poses)
    for i, d in enumerate(scene.distractors):
        tri = _primitive(d).triangles
        local.append(tri)
        world.append(tri @ d.pose.matrix.T + d.pose.translation)
        material.append(np.full(len(tri), base + i))
        parts.append(np.zeros(len(tri), dtype=int))
    return np.concatenate(world), np.concatenate(local), np.concatenate(material), np.concatenate(parts)


def rasterize(tri_cam: np.ndarray, k: CameraIntrinsics):
    """Z-buffer camera-frame triangles (M, 3, 3).

    Returns ``(ids, b0, b1)``: per-pixel triangle index (-1 where empty) and
    the first two perspective-correct barycentric weights.
    """
    W, H = k.width, k.height
    inv_z = np.zeros((H, W))
    ids = np.full((H, W), -1, dtype=np.int64)
    b0 = np.zeros((H, W))
    b1 = np.zeros((H, W))
    if len(tri_cam) == 0:
        return ids, b0, b1
    z = tri_cam[:, :, 2]
    n = np.cross(tri_cam[:, 1] - tri_cam[:, 0], tri_cam[:, 2] - tri_cam[:, 0])
    keep = (z.min(axis=1) > NEAR) & (np.einsum("ij,ij->i", n, tri_cam[:, 0]) < 0)
    idx = np.nonzero(keep)[0]
    u = k.fx * tri_cam[idx, :, 0] / z[idx] + k.cx
    v = k.fy * tri_cam[idx, :, 1] / z[idx] + k.cy
    x0 = np.maximum(np.ceil(u.min(axis=1)), 0).astype(int)
    x1 = np.minimum(np.floor(u.max(axis=1)), W - 1).astype(int)
    y0 = np.maximum(np.ceil(v.min(axis=1)), 0).astype(int)
    y1 = np.minimum(np.floor(v.max(axis=1)), H - 1).astype(int)
    visible = (x0 <= x1) & (y0 <= y1)
    for r in np.nonzero(visible)[0]:
        (ua, ub, uc), (va, vb, vc) = u[r], v[r]
        area = (ub - ua) * (vc - va) - (uc - ua) * (vb - va)
        if area == 0:
            continue
        xs = np.arange(x0[r], x1[r] + 1, dtype=float)[None, :]
        ys = np.arange(y0[r], y1[r] + 1, dtype=float)[:, None]
        l0 = ((ub - xs) * (vc - ys) - (uc - xs) * (vb - ys)) / area
        l1 = ((uc - xs) * (va - ys) - (ua - xs) * (vc - ys)) / area
        l2 = 1.0 - l0 - l1
        inside = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
        if not inside.any():
            continue
        za, zb, zc = z[idx[r]]
        iz = l0 / za + l1 / zb + l2 / zc
        win = (y0[r], x0[r])
        sl = np.s_[win[0]:y1[r] + 1, win[1]:x1[r] + 1]
        closer = inside & (iz > inv_z[sl])
        if not closer.any():
            continue
        inv_z[sl][closer] = iz[closer]
        ids[sl][closer] = idx[r]
        b0[sl][closer] = (l0 / za / iz)[closer]
        b1[sl][closer] = (l1 / zb / iz)[closer]
    return ids, b0, b1


def _shade(scene, pos, normal):
    light = np.full(len(pos), scene.ambient)
    light = light[:, None] * np.ones(3)
    if scene.skylight:
        light += scene.skylight * (0.5 + 0.5 * normal[:, 2])[:, None]
    for L in scene.lights:
        d = np.asarray(L.position) - pos
        dist = np.linalg.norm(d, axis=1)
        lambert = np.maximum(0.0, np.einsum("ij,ij->i", normal, d) / dist)
        light += (L.intensity * lambert / (1.0 + 0.05 * dist**2))[:, None] * np.asarray(L.color)
    return light


def render_frame(scene: SceneSpec, k: CameraIntrinsics, return_ids: bool = False):
    """Render ``scene`` to an (H, W, 3) uint8 RGB image.

    With ``return_ids`` also returns the per-pixel material index
    (-1 background, ``0..P-1`` pallets, ``P + i`` distractor ``i``).
    """
    world, local, material, parts = _scene_triangles(scene)
    cam = scene.camera_pose
    Rt = cam.matrix.T
    tri_cam = (world - cam.translation) @ Rt.T
    ids, b0, b1 = rasterize(tri_cam, k)

    img = render_background(scene.background, k.width, k.height)
    mask = ids >= 0
    tri = ids[mask]
    w0, w1 = b0[mask], b1[mask]
    w2 = 1.0 - w0 - w1
    bary = np.stack([w0, w1, w2], axis=1)[:, :, None]
    pos = np.sum(world[tri] * bary, axis=1)
    loc = np.sum(local[tri] * bary, axis=1)
    n = np.cross(world[:, 1] - world[:, 0], world[:, 2] - world[:, 0])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    normal = n[tri]

    mat = material[tri]
    albedo = np.empty((len(tri), 3))
    n_pallets = len(scene.pallet_poses)
    is_pallet = mat < n_pallets
    if is_pallet.any():
        albedo[is_pallet] = pattern_color(scene.pallet_texture, loc[is_pallet, 0], loc[is_pallet, 1],
                                          parts[tri[is_pallet]], scene.texture_seed)
    for i, d in enumerate(scene.distractors):
        sel = mat == n_pallets + i
        albedo[sel] = d.color
    img[mask] = albedo * _shade(scene, pos, normal)
    rgb = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if return_ids:
        mat_img = np.full(ids.shape, -1, dtype=np.int64)
        mat_img[mask] = mat
        return rgb, mat_img
    return rgb
