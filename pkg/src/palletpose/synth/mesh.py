"""Triangle meshes: a simplified EPAL pallet and distractor primitives.

Faces are wound counter-clockwise seen from outside, so
``cross(v1 - v0, v2 - v0)`` is the outward normal.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..geometry import EPAL_DIMENSIONS

# EPAL layout in millimetres, z measured up from the underside.
_BLOCK_X = (-527.5, 0.0, 527.5)
_BLOCK_Y = (-350.0, 0.0, 350.0)
_BOTTOM_WIDTHS = (100.0, 145.0, 100.0)
_TOP_Y = (-327.5, -163.75, 0.0, 163.75, 327.5)
_TOP_WIDTHS = (145.0, 100.0, 145.0, 100.0, 145.0)
_BOARD, _BLOCK_H = 22.0, 78.0

_BOX_FACES = np.array([
    [0, 2, 1], [0, 3, 2],  # -z
    [4, 5, 6], [4, 6, 7],  # +z
    [0, 1, 5], [0, 5, 4],  # -y
    [2, 3, 7], [2, 7, 6],  # +y
    [1, 2, 6], [1, 6, 5],  # +x
    [3, 0, 4], [3, 4, 7],  # -x
])


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray   # (N, 3)
    faces: np.ndarray      # (M, 3) int
    parts: np.ndarray      # (M,) int, sub-part index per face

    @property
    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    def transformed(self, R, t) -> "Mesh":
        return Mesh(self.vertices @ np.asarray(R).T + np.asarray(t), self.faces, self.parts)


def merge(meshes) -> Mesh:
    verts, faces, parts, offset = [], [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        parts.append(m.parts)
        offset += len(m.vertices)
    return Mesh(np.vstack(verts), np.vstack(faces), np.concatenate(parts))


def box_mesh(center, size, part=0) -> Mesh:
    c = np.asarray(center, dtype=float)
    h = np.asarray(size, dtype=float) / 2.0
    signs = np.array([[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
                      [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]], dtype=float)
    return Mesh(c + signs * h, _BOX_FACES.copy(), np.full(12, part))


def sphere_mesh(radius, n_lat=8, n_lon=12, part=0) -> Mesh:
    verts = [(0.0, 0.0, -radius)]
    for i in range(1, n_lat):
        theta = np.pi * i / n_lat - np.pi / 2
        for j in range(n_lon):
            phi = 2 * np.pi * j / n_lon
            verts.append((radius * np.cos(theta) * np.cos(phi), radius * np.cos(theta) * np.sin(phi),
                          radius * np.sin(theta)))
    verts.append((0.0, 0.0, radius))
    faces = []
    ring = lambda i, j: 1 + (i - 1) * n_lon + j % n_lon  # noqa: E731
    for j in range(n_lon):
        faces.append((0, ring(1, j + 1), ring(1, j)))
        faces.append((len(verts) - 1, ring(n_lat - 1, j), ring(n_lat - 1, j + 1)))
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b, c, d = ring(i, j), ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j)
            faces += [(a, b, c), (a, c, d)]
    return Mesh(np.array(verts), np.array(faces), np.full(len(faces), part))


def cylinder_mesh(radius, height, n=16, part=0) -> Mesh:
    phi = 2 * np.pi * np.arange(n) / n
    ring = np.column_stack([radius * np.cos(phi), radius * np.sin(phi)])
    bottom = np.column_stack([ring, np.full(n, -height / 2)])
    top = np.column_stack([ring, np.full(n, height / 2)])
    verts = np.vstack([bottom, top, [[0, 0, -height / 2], [0, 0, height / 2]]])
    cb, ct = 2 * n, 2 * n + 1
    faces = []
    for j in range(n):
        k = (j + 1) % n
        faces += [(j, k, n + k), (j, n + k, n + j), (cb, k, j), (ct, n + j, n + k)]
    return Mesh(verts, np.array(faces), np.full(len(faces), part))


@lru_cache(maxsize=8)
def _pallet_mesh(dimensions) -> Mesh:
    boxes = []
    for y, w in zip(_BLOCK_Y, _BOTTOM_WIDTHS):
        boxes.append(((0.0, y, _BOARD / 2), (1200.0, w, _BOARD)))
    for x in _BLOCK_X:
        for y in _BLOCK_Y:
            boxes.append(((x, y, _BOARD + _BLOCK_H / 2), (145.0, 100.0, _BLOCK_H)))
    for x in _BLOCK_X:
        boxes.append(((x, 0.0, _BOARD * 1.5 + _BLOCK_H), (145.0, 800.0, _BOARD)))
    for y, w in zip(_TOP_Y, _TOP_WIDTHS):
        boxes.append(((0.0, y, _BOARD * 2.5 + _BLOCK_H), (1200.0, w, _BOARD)))
    ref = np.array([1200.0, 800.0, 3 * _BOARD + _BLOCK_H])
    scale = np.asarray(dimensions) / ref
    parts = []
    for i, (c, s) in enumerate(boxes):
        c = (np.asarray(c) - [0.0, 0.0, ref[2] / 2]) * scale
        parts.append(box_mesh(c, np.asarray(s) * scale, part=i))
    m = merge(parts)
    for a in (m.vertices, m.faces, m.parts):
        a.setflags(write=False)
    return m


def pallet_mesh(dimensions=EPAL_DIMENSIONS) -> Mesh:
    """Boxes of a Euro pallet in the object frame (centroid at the origin, z up).

    Part indices: 0-2 bottom boards, 3-11 blocks, 12-14 stringer boards,
    15-19 top deck boards.
    """
    return _pallet_mesh(tuple(float(d) for d in dimensions))
