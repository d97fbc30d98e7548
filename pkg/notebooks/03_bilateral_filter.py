"""
Why a bilateral filter keeps corners sharp
==========================================

Averaging neighbor positions pulls a corner point inward. The bilateral
projection distance measures offsets along normals and down-weights
neighbors whose normals disagree, so a point exactly on the corner costs
nothing.
"""
import numpy as np

from ifsdf.filter import average_filter_baseline, bilateral_distance, weight_normal, weight_spatial

# Two faces meeting at a right angle along the z axis.
s = np.linspace(0.02, 0.2, 10)
face_a = np.stack([0 * s, s, 0 * s], 1)   # on x = 0, normal +x
face_b = np.stack([s, 0 * s, 0 * s], 1)   # on y = 0, normal +y
nbrs = np.vstack([face_a, face_b])
normals = np.vstack([np.tile([1.0, 0, 0], (10, 1)), np.tile([0, 1.0, 0], (10, 1))])

corner = np.zeros(3)
print("average of neighbors:", average_filter_baseline(corner, nbrs).round(4), "(off the surface)")

# Seen from face A, the corner is on its plane: zero cost. Points slightly off
# the face pay twice their offset (one projection on each normal).
for h in (0.0, 0.01, 0.05):
    p = corner + [h, 0.05, 0]
    d = bilateral_distance(p, [1.0, 0, 0], nbrs, normals)
    print(f"offset {h:.2f} from face A -> d_bi = {d:.4f}")

print("spatial weight at sigma:", weight_spatial([0, 0, 0], [0.1, 0, 0], 0.1))
print("normal weight at 15 degrees:", weight_normal([0, 0, 1], [np.sin(np.radians(15)), 0, np.cos(np.radians(15))]))
print("normal weight across the corner:", weight_normal([1.0, 0, 0], [0, 1.0, 0]))
