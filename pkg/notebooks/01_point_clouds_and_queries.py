"""
Point clouds, neighbors and training queries
============================================

Input points are normalized into a unit box, indexed by a kd-tree, and
surrounded by Gaussian query samples whose spread follows the local
point density.
"""
import numpy as np

from ifsdf.geom import PointCloud, knn, normalize, query_sigmas, sample_queries
from ifsdf.shapes import sphere_points

# A sphere of radius 2 centered away from the origin.
raw = PointCloud(sphere_points(2000, radius=2.0, seed=0) + [5.0, -1.0, 3.0])
cloud, tf = normalize(raw)
print("center", tf.center, "scale", tf.scale)
print("normalized extent", cloud.points.min(0), cloud.points.max(0))

# Exact neighbors; ties go to the lower index.
idx = knn(cloud, cloud.points[0], 8)
print("8 nearest to point 0:", idx)

# Each point gets its own sampling scale: distance to its 50th neighbor.
sig = query_sigmas(cloud, 50)
print(f"sigma range {sig.min():.4f} .. {sig.max():.4f}")

batch = sample_queries(cloud, per_point=25, sigma_k=50, rng_seed=0, k_filter=16)
print(len(batch), "queries; first query's NN:", batch.nn_index[0])
print("patch around NN(q):", batch.neighbor_indices[0])

# How far do the queries stray from the surface?
r = np.linalg.norm(batch.queries, axis=1)
print(f"query radius mean {r.mean():.3f} std {r.std():.3f} (surface at 0.5)")
