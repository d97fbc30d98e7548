"""Iso-surface extraction over a regular grid and area-uniform surface sampling."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from skimage import measure

from .geom import InputError

log = logging.getLogger(__name__)


class EmptyMeshWarning(UserWarning):
    pass


@dataclass
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles) and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise InputError("triangle index out of range")

    @property
    def is_empty(self) -> bool:
        return len(self.triangles) == 0

    def face_cross(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        return np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_cross(), axis=1)

    def face_normals(self) -> np.ndarray:
        c = self.face_cross()
        return c / np.maximum(np.linalg.norm(c, axis=1, keepdims=True), 1e-300)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def euler_characteristic(self) -> int:
        t = self.triangles
        edges = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        n_edges = len(np.unique(edges, axis=0))
        n_verts = len(np.unique(t))
        return n_verts - n_edges + len(t)

    def transformed(self, fn) -> "Mesh":
        return Mesh(fn(self.vertices), self.triangles.copy(), None if self.normals is None else self.normals.copy())


@dataclass(frozen=True)
class GridSpec:
    resolution: tuple = (256, 256, 256)
    lo: tuple = (-0.55, -0.55, -0.55)
    hi: tuple = (0.55, 0.55, 0.55)

    def __post_init__(self):
        res = self.resolution
        if isinstance(res, int):
            object.__setattr__(self, "resolution", (res,) * 3)
        if min(self.resolution) < 8:
            raise InputError("grid resolution must be at least 8 per axis")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise InputError("grid bounds must have positive extent")

    @classmethod
    def cube(cls, resolution: int = 256, half: float = 0.55) -> "GridSpec":
        return cls((resolution,) * 3, (-half,) * 3, (half,) * 3)

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.hi) - np.asarray(self.lo)) / (np.asarray(self.resolution) - 1)

    @property
    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.spacing))

    def axes(self):
        return [np.linspace(l, h, r) for l, h, r in zip(self.lo, self.hi, self.resolution)]


def evaluate_grid(field, grid: GridSpec) -> np.ndarray:
    """Field values at every grid node, evaluated slab by slab along x."""
    xs, ys, zs = grid.axes()
    yy, zz = np.meshgrid(ys, zs, indexing="ij")
    slab = np.stack([np.zeros(yy.size), yy.ravel(), zz.ravel()], axis=1)
    values_fn = field.values if hasattr(field, "values") else field
    vol = np.empty(grid.resolution, dtype=np.float64)
    for i, x in enumerate(xs):
        slab[:, 0] = x
        vol[i] = np.asarray(values_fn(slab), dtype=np.float64).reshape(len(ys), len(zs))
    return vol


def marching_cubes(field, grid: GridSpec | None = None, iso: float = 0.0, volume=None) -> Mesh:
    """Triangulate ``{x : f(x) = iso}``; faces wind so that normals point up the field.

    ``field`` is a FieldBase or a callable mapping (n, 3) points to values.
    Vertex normals come from the field gradient when available.
    """
    grid = grid or GridSpec()
    vol = evaluate_grid(field, grid) if volume is None else np.asarray(volume, dtype=np.float64)
    if not np.all(np.isfinite(vol)):
        raise InputError("field is not finite over the grid")
    if vol.min() > iso or vol.max() < iso:
        warnings.warn(f"no crossing of iso={iso} inside the grid; mesh is empty", EmptyMeshWarning, stacklevel=2)
        return Mesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    verts, faces, _, _ = measure.marching_cubes(
        vol, level=iso, spacing=tuple(grid.spacing), method="lorensen",
        gradient_direction="ascent", allow_degenerate=False)
    verts = verts.astype(np.float64) + np.asarray(grid.lo)
    # skimage winds faces the other way round relative to "ascent"; flip to outward
    faces = faces[:, ::-1]
    mesh = _drop_degenerate(Mesh(verts, faces))
    if hasattr(field, "eval_points") and len(mesh.vertices):
        _, g = field.eval_points(mesh.vertices)
        mesh.normals = g / np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-12)
    return mesh


def _drop_degenerate(mesh: Mesh, min_area: float = 1e-12) -> Mesh:
    """Collapse near-zero-area triangles to a point instead of deleting them.

    Deleting would open a hole; welding the three corners keeps the surface
    closed (the neighbors across its edges fold onto each other).
    """
    verts, tris = mesh.vertices.copy(), mesh.triangles.copy()
    for _ in range(10):
        m = Mesh(verts, tris)
        bad = np.nonzero(m.face_areas() <= min_area)[0]
        if len(bad) == 0:
            break
        parent = np.arange(len(verts))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for t in tris[bad]:
            r = find(t[0])
            for j in t[1:]:
                parent[find(j)] = r
        roots = np.array([find(i) for i in range(len(verts))])
        for r in np.unique(roots[tris[bad].ravel()]):
            members = roots == r
            verts[r] = verts[members].mean(axis=0)
        tris = roots[tris]
        tris = tris[(tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) & (tris[:, 0] != tris[:, 2])]
    used, inv = np.unique(tris, return_inverse=True)
    return Mesh(verts[used], inv.reshape(-1, 3))


def sample_mesh_surface(mesh: Mesh, n: int, seed: int = 0, return_face_index: bool = False):
    """Area-uniform samples on the surface, with the face normal of each sample."""
    if mesh.is_empty:
        raise InputError("cannot sample an empty mesh")
    rng = np.random.default_rng(seed)
    areas = mesh.face_areas()
    face = rng.choice(len(areas), size=n, p=areas / areas.sum())
    u, v = rng.random(n), rng.random(n)
    flip = u + v > 1.0
    u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]
    tri = mesh.vertices[mesh.triangles[face]]
    pts = tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) + v[:, None] * (tri[:, 2] - tri[:, 0])
    normals = mesh.face_normals()[face]
    if return_face_index:
        return pts, normals, face
    return pts, normals
