"""
Reconstructing a sphere end to end
==================================

Train on 2000 points, mesh the zero level set, and score the mesh against
the exact sphere. Set ``ITERATIONS`` to 10000 for the full-quality run
(about four minutes on one CPU core).
"""
import os
import time

import numpy as np

from ifsdf import FilterConfig, GridSpec, PointCloud, TrainConfig, evaluate, marching_cubes, normalize, train
from ifsdf.shapes import sphere_points

ITERATIONS = int(os.environ.get("IFSDF_ITERATIONS", 1000))

points = sphere_points(2000, radius=0.4, seed=0)
cloud, tf = normalize(PointCloud(points))

t0 = time.perf_counter()
field, log = train(cloud, FilterConfig(), TrainConfig(iterations=ITERATIONS))
print(f"trained {ITERATIONS} iterations in {time.perf_counter() - t0:.0f}s")
tot = log.totals()
print(f"total loss {tot[:50].mean():.4f} -> {tot[-50:].mean():.4f}")

mesh = marching_cubes(field, GridSpec.cube(128)).transformed(tf.invert)
print("vertices", len(mesh.vertices), "Euler characteristic", mesh.euler_characteristic())

ref = sphere_points(10_000, 0.4, seed=7)
rep = evaluate(mesh, ref, n_samples=10_000, gt_normals=ref / 0.4)
print(rep.to_text(cd_l2_factor=100))
