"""Point clouds, normalization, exact kNN and query sampling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree


class InputError(ValueError):
    """Bad user input: empty/non-finite clouds, impossible neighbor counts."""


@dataclass(frozen=True)
class NormalizationTransform:
    center: np.ndarray
    scale: float

    def apply(self, points):
        return (np.asarray(points, dtype=np.float64) - self.center) / self.scale

    def invert(self, points):
        return np.asarray(points, dtype=np.float64) * self.scale + self.center


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Immutable set of input points plus a median-split kd-tree.

    Works for 2D and 3D coordinates; the dimension is the second axis of
    ``points``.
    """

    points: np.ndarray
    _tree: cKDTree | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InputError("point cloud must be a non-empty (N, d) array")
        if pts.shape[1] not in (2, 3):
            raise InputError(f"points must be 2D or 3D, got {pts.shape[1]} coordinates")
        if not np.all(np.isfinite(pts)):
            raise InputError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        # balanced_tree=True -> median splits
        object.__setattr__(self, "_tree", cKDTree(pts, balanced_tree=True))

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def tree(self) -> cKDTree:
        return self._tree

    def __len__(self):
        return self.count


def normalize(cloud: PointCloud, half_extent: float = 0.5):
    """Center on the bounding-box center and scale the largest side to ``2*half_extent``.

    With the default target, ``scale`` is the largest bounding-box side, so
    ``{(0,0,0), (2,0,0)}`` maps to ``{(-0.5,0,0), (0.5,0,0)}`` with scale 2.
    """
    pts = cloud.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise InputError("point cloud has zero extent; cannot normalize")
    center = (lo + hi) / 2.0
    scale = extent / (2.0 * half_extent)
    tf = NormalizationTransform(center=center, scale=scale)
    return PointCloud(tf.apply(pts)), tf


def denormalize(points, transform: NormalizationTransform) -> np.ndarray:
    return transform.invert(points)


def _tie_sorted(d, idx):
    # per row: ascending distance, then ascending index
    order = np.lexsort((idx, d), axis=-1)
    return np.take_along_axis(d, order, axis=-1), np.take_along_axis(idx, order, axis=-1)


def knn_batch(cloud: PointCloud, queries, k: int, return_distance: bool = False):
    """Exact k nearest neighbors for many queries, ties broken by lower index."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    n = cloud.count
    if k < 1 or k > n:
        raise InputError(f"k={k} must be in [1, {n}]")
    if queries.shape[0] == 0:
        empty_i = np.zeros((0, k), dtype=np.int64)
        return (empty_i, np.zeros((0, k))) if return_distance else empty_i
    # a few extra candidates so ties at the k-th distance can be resolved
    kq = min(n, k + 4)
    d, idx = cloud.tree.query(queries, k=kq)
    d = np.asarray(d, dtype=np.float64).reshape(len(queries), kq)
    idx = np.asarray(idx, dtype=np.int64).reshape(len(queries), kq)
    # recompute distances exactly so equal distances compare equal
    d = np.linalg.norm(cloud.points[idx] - queries[:, None, :], axis=-1)
    d, idx = _tie_sorted(d, idx)

    # ties at the k-th distance may continue past the candidate list
    if kq > k:
        spill = d[:, k - 1] >= d[:, kq - 1]
        for row in np.nonzero(spill)[0]:
            all_d = np.linalg.norm(cloud.points - queries[row], axis=-1)
            order = np.lexsort((np.arange(n), all_d))[:kq]
            d[row], idx[row] = all_d[order], order
    d, idx = d[:, :k], idx[:, :k]
    if return_distance:
        return idx, d
    return idx


def knn(cloud: PointCloud, query, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest points to a single query, nearest first."""
    return knn_batch(cloud, np.asarray(query, dtype=np.float64)[None, :], k)[0]


@dataclass(frozen=True, eq=False)
class QueryBatch:
    """Sampled queries with their cached nearest input point and its neighborhood."""

    queries: np.ndarray
    nn_index: np.ndarray
    neighbor_indices: np.ndarray

    def __len__(self):
        return self.queries.shape[0]

    def subset(self, rows) -> "QueryBatch":
        return QueryBatch(self.queries[rows], self.nn_index[rows], self.neighbor_indices[rows])


def build_query_batch(cloud: PointCloud, queries, k_filter: int) -> QueryBatch:
    """Attach NN(q) and the K-neighborhood of NN(q) to each query."""
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, cloud.dim)
    nn = knn_batch(cloud, queries, 1)[:, 0] if len(queries) else np.zeros(0, dtype=np.int64)
    if len(queries):
        # neighborhood of NN(q) inside P always starts with NN(q) itself
        nbrs = knn_batch(cloud, cloud.points[nn], k_filter)
        missing = nbrs[:, 0] != nn
        if np.any(missing):
            # duplicate points can put a twin first; force NN(q) into slot 0
            for r in np.nonzero(missing)[0]:
                row = [nn[r]] + [j for j in nbrs[r] if j != nn[r]]
                nbrs[r] = row[:k_filter]
    else:
        nbrs = np.zeros((0, k_filter), dtype=np.int64)
    for arr in (queries, nn, nbrs):
        arr.setflags(write=False)
    return QueryBatch(queries, nn, nbrs)


def query_sigmas(cloud: PointCloud, sigma_k: int) -> np.ndarray:
    """Per-point sampling scale: distance to the ``sigma_k``-th nearest point (self counts as first)."""
    _, d = knn_batch(cloud, cloud.points, sigma_k, return_distance=True)
    return d[:, -1]


def sample_queries(cloud: PointCloud, per_point: int = 25, sigma_k: int = 50,
                   rng_seed: int = 0, k_filter: int = 16) -> QueryBatch:
    """Draw ``per_point`` Gaussian samples around every input point.

    The standard deviation for point ``p`` is its distance to the
    ``sigma_k``-th nearest input point. Queries are ordered point-major:
    rows ``i*per_point .. (i+1)*per_point-1`` belong to point ``i``.
    """
    if per_point < 0:
        raise InputError("per_point must be non-negative")
    if sigma_k > cloud.count:
        raise InputError(f"sigma_k={sigma_k} exceeds point count {cloud.count}")
    if k_filter > cloud.count:
        raise InputError(f"k_filter={k_filter} exceeds point count {cloud.count}")
    if per_point == 0:
        return build_query_batch(cloud, np.zeros((0, cloud.dim)), k_filter)
    sig = query_sigmas(cloud, sigma_k)
    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal((cloud.count, per_point, cloud.dim))
    q = cloud.points[:, None, :] + sig[:, None, None] * noise
    return build_query_batch(cloud, q.reshape(-1, cloud.dim), k_filter)
