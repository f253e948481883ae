"""Tour of the Stiefel geometry primitives.

Points with orthonormal columns, tangent vectors, the polar retraction,
the induced arithmetic mean of a cluster, and alignment-invariant distance.
"""

import numpy as np

from drsgt import (
    consensus_error,
    induced_arithmetic_mean,
    polar_retraction,
    procrustes_distance,
    random_point,
    random_tangent,
    tangent_projection,
)

rng = np.random.default_rng(0)

print("== points and tangents on St(8, 3) ==")
x = random_point(8, 3, rng)
print("X^T X =\n", np.round(x.data.T @ x.data, 12))

ambient = rng.standard_normal((8, 3))
v = tangent_projection(x, ambient)
print("projection defect X^T v + v^T X (should be ~0):",
      np.linalg.norm(x.data.T @ v.data + v.data.T @ x.data))
print("non-expansive: ||P(Y)|| =", round(v.norm, 4),
      "<= ||Y|| =", round(np.linalg.norm(ambient), 4))

print("\n== polar retraction ==")
y = polar_retraction(x, v)
print("retracted point orthonormality defect:",
      np.linalg.norm(y.data.T @ y.data - np.eye(3)))
small = random_tangent(x, rng, norm=0.05)
stepped = polar_retraction(x, small)
print("first order: ||R_X(v) - (X+v)|| =",
      np.linalg.norm(stepped.data - (x.data + small.data)),
      "<= ||v||^2 =", small.norm**2)

print("\n== induced arithmetic mean of a cluster ==")
cluster = [polar_retraction(x, random_tangent(x, rng, norm=0.2)) for _ in range(5)]
center = induced_arithmetic_mean(cluster)
spread = consensus_error(cluster)
print("total squared spread around the mean:", round(spread, 6))
worse = sum(np.linalg.norm(p.data - x.data) ** 2 for p in cluster)
print("any other point does worse, e.g. around X:", round(worse, 6))

print("\n== alignment-invariant distance ==")
q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
rotated = type(x)(x.data @ q)
print("d(XQ, X) =", procrustes_distance(rotated, x), " (orthogonal invariance)")
print("d(X, other) =", round(procrustes_distance(x, random_point(8, 3, rng)), 4))
