"""Analytic SDFs and fixture point sets (spheres, circles, planes, cubes)."""
from __future__ import annotations

import numpy as np
import torch

from .net import FieldBase


class PlaneField(FieldBase):
    """f(x) = n . x - offset for a unit normal n."""

    def __init__(self, normal=(0.0, 0.0, 1.0), offset: float = 0.0):
        super().__init__()
        n = np.asarray(normal, dtype=np.float64)
        self.dim = len(n)
        self.register_buffer("normal", torch.as_tensor(n / np.linalg.norm(n)))
        self.offset = float(offset)

    def forward(self, x):
        return x.to(torch.float64) @ self.normal - self.offset


class SphereField(FieldBase):
    """f(x) = |x - c| - r (a circle when dim == 2)."""

    def __init__(self, radius: float = 0.5, center=None, dim: int = 3):
        super().__init__()
        self.dim = dim if center is None else len(center)
        c = np.zeros(self.dim) if center is None else np.asarray(center, dtype=np.float64)
        self.register_buffer("center", torch.as_tensor(c))
        self.radius = float(radius)

    def forward(self, x):
        return torch.linalg.vector_norm(x.to(torch.float64) - self.center, dim=-1) - self.radius


class BoxField(FieldBase):
    """Exact SDF of an axis-aligned box with the given half extents."""

    def __init__(self, half_extent=(0.5, 0.5, 0.5)):
        super().__init__()
        h = np.asarray(half_extent, dtype=np.float64)
        self.dim = len(h)
        self.register_buffer("half_extent", torch.as_tensor(h))

    def forward(self, x):
        q = torch.abs(x.to(torch.float64)) - self.half_extent
        outside = torch.linalg.vector_norm(torch.clamp_min(q, 0.0), dim=-1)
        inside = torch.clamp_max(q.max(dim=-1).values, 0.0)
        return outside + inside


def sphere_points(n: int, radius: float = 0.5, seed: int = 0, dim: int = 3) -> np.ndarray:
    v = np.random.default_rng(seed).standard_normal((n, dim))
    return radius * v / np.linalg.norm(v, axis=1, keepdims=True)


def circle_points(n: int, radius: float = 0.5) -> np.ndarray:
    t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return radius * np.stack([np.cos(t), np.sin(t)], axis=1)


def plane_points(n: int, half_width: float = 0.5, seed: int = 0) -> np.ndarray:
    xy = np.random.default_rng(seed).uniform(-half_width, half_width, (n, 2))
    return np.hstack([xy, np.zeros((n, 1))])


def cube_mesh(half: float = 0.5):
    """Closed, outward-oriented 12-triangle cube centered at the origin."""
    v = np.array([[x, y, z] for x in (-half, half) for y in (-half, half) for z in (-half, half)])
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -y
        (2, 3, 7, 6),  # +y
        (0, 2, 6, 4),  # -z
        (1, 5, 7, 3),  # +z
    ]
    faces = []
    for a, b, c, d in quads:
        faces += [(a, b, c), (a, c, d)]
    return v.astype(np.float64), np.asarray(faces, dtype=np.int64)


def icosphere(radius: float = 0.5, subdivisions: int = 3):
    """Outward-oriented triangulated sphere."""
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.asarray(p, dtype=np.float64) / np.linalg.norm(p) for p in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return radius * np.asarray(verts), np.asarray(faces, dtype=np.int64)
