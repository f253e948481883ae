"""Geometry primitives for the Stiefel manifold St(n, r).

St(n, r) = {X in R^{n x r} : X^T X = I_r} is the set of n x r matrices with
orthonormal columns, viewed as an embedded submanifold of Euclidean space
with the trace inner product <u, v> = tr(u^T v).  The tangent space at X is

    T_X St(n, r) = {u in R^{n x r} : X^T u + u^T X = 0}.

This module provides:

- validated containers for points and tangent vectors,
- the orthogonal projection onto the tangent space,
- the polar retraction (computed through an SVD of X + v),
- the induced arithmetic mean of a point cluster (the manifold point
  minimizing the total squared Euclidean distance to the cluster, equal to
  the polar factor of the Euclidean average),
- consensus and Procrustes-aligned distance measures,
- a membership test for the local consensus region used by the multi-agent
  engine.

All functions are pure and operate on immutable inputs; arrays held by the
containers are marked read-only at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateMeanError, DimensionError, ManifoldError, ParameterError

FloatArray = NDArray[np.float64]

# An unconstrained n x r matrix in the ambient space (tracker variables,
# Euclidean gradients, Euclidean averages).  No invariants to enforce, so a
# plain array is used rather than a wrapper class.
AmbientMatrix = FloatArray

#: Tolerance on ||X^T X - I||_F for a point to count as orthonormal.
ORTHONORMALITY_TOL = 1e-10
#: Tolerance on ||X^T u + u^T X||_F for a vector to count as tangent.
TANGENCY_TOL = 1e-10
#: Smallest admissible r-th singular value of a Euclidean mean before its
#: projection onto the manifold is declared non-unique.
RANK_TOL = 1e-12

# Tolerances sit ~100x above double-precision noise for n, r <= 64.


def _as_matrix(data, name: str = "data") -> FloatArray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-d matrix, got shape {arr.shape}")
    return arr


class StiefelPoint:
    """A point on St(n, r): an n x r matrix with orthonormal columns.

    The orthonormality defect ||X^T X - I_r||_F is checked at construction
    unless ``check=False`` is passed (hot-path constructor for the simulator
    inner loop; the engine re-audits such points periodically).
    """

    __slots__ = ("data",)

    def __init__(self, data, *, check: bool = True):
        arr = _as_matrix(data)
        n, r = arr.shape
        if r > n:
            raise DimensionError(f"need r <= n, got shape ({n}, {r})")
        if check:
            defect = orthonormality_defect(arr)
            if defect > ORTHONORMALITY_TOL:
                raise ManifoldError(
                    f"columns not orthonormal: ||X^T X - I||_F = {defect:.3e} "
                    f"> {ORTHONORMALITY_TOL:.1e}"
                )
        arr = arr.copy() if not arr.flags.owndata else arr
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("StiefelPoint is immutable")

    def __reduce__(self):
        # unchecked rebuild: copies and fault snapshots must round-trip even
        # when they hold (deliberately) off-manifold data
        return (_rebuild_point, (np.asarray(self.data),))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def r(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"StiefelPoint(n={self.n}, r={self.r})"


class TangentVector:
    """A tangent vector at a base point: u with X^T u + u^T X = 0.

    The tangency defect is checked at construction unless ``check=False``.
    """

    __slots__ = ("data", "base")

    def __init__(self, data, base: StiefelPoint, *, check: bool = True):
        arr = _as_matrix(data)
        if arr.shape != base.shape:
            raise DimensionError(
                f"tangent data shape {arr.shape} != base shape {base.shape}"
            )
        if check:
            defect = tangency_defect(base.data, arr)
            if defect > TANGENCY_TOL:
                raise ManifoldError(
                    f"not tangent at base: ||X^T u + u^T X||_F = {defect:.3e} "
                    f"> {TANGENCY_TOL:.1e}"
                )
        arr = arr.copy() if not arr.flags.owndata else arr
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "base", base)

    def __setattr__(self, name, value):
        raise AttributeError("TangentVector is immutable")

    def __reduce__(self):
        return (_rebuild_tangent, (np.asarray(self.data), self.base))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def __repr__(self) -> str:
        return f"TangentVector(shape={self.data.shape}, norm={self.norm:.3e})"


def _rebuild_point(data) -> "StiefelPoint":
    return StiefelPoint(data, check=False)


def _rebuild_tangent(data, base) -> "TangentVector":
    return TangentVector(data, base, check=False)


def orthonormality_defect(data: FloatArray) -> float:
    """||X^T X - I_r||_F, the distance of the Gram matrix from the identity."""
    r = data.shape[1]
    return float(np.linalg.norm(data.T @ data - np.eye(r)))


def tangency_defect(base: FloatArray, data: FloatArray) -> float:
    """||X^T u + u^T X||_F, zero exactly when u is tangent at X."""
    s = base.T @ data
    return float(np.linalg.norm(s + s.T))


def random_point(n: int, r: int, rng: np.random.Generator) -> StiefelPoint:
    """Draw a point uniformly on St(n, r) (polar factor of a Gaussian matrix)."""
    g = rng.standard_normal((n, r))
    return nearest_point(g)


def random_tangent(
    X: StiefelPoint, rng: np.random.Generator, norm: float | None = None
) -> TangentVector:
    """Draw a random tangent vector at X, optionally rescaled to a given norm."""
    v = tangent_projection(X, rng.standard_normal(X.shape))
    if norm is None:
        return v
    current = v.norm
    if current == 0.0:
        return v
    return TangentVector(v.data * (norm / current), X, check=False)


def nearest_point(Y) -> StiefelPoint:
    """Project an ambient matrix onto St(n, r) in Frobenius norm.

    The minimizer is the polar factor U V^T of the thin SVD Y = U S V^T; it
    is unique as long as Y has full column rank.

    Raises:
        DegenerateMeanError: if the smallest singular value of Y falls below
            ``RANK_TOL`` (the projection is then non-unique).
    """
    arr = _as_matrix(Y)
    u, s, vt = np.linalg.svd(arr, full_matrices=False)
    if s[-1] < RANK_TOL:
        raise DegenerateMeanError(
            f"matrix is rank deficient (sigma_r = {s[-1]:.3e}); "
            "projection onto the manifold is not unique"
        )
    return StiefelPoint(u @ vt, check=False)


def tangent_projection(X: StiefelPoint, Y, *, check: bool = True) -> TangentVector:
    """Orthogonally project an ambient matrix onto the tangent space at X.

        P_X(Y) = Y - (1/2) X (X^T Y + Y^T X)

    The projection is idempotent and non-expansive: ||P_X(Y)||_F <= ||Y||_F.

    Args:
        X: Base point.
        Y: Ambient n x r matrix (or a TangentVector, whose data is used).
        check: Validate the tangency invariant of the result.

    Returns:
        The projected tangent vector at X.
    """
    arr = Y.data if isinstance(Y, TangentVector) else _as_matrix(Y, "Y")
    if arr.shape != X.shape:
        raise DimensionError(f"shape mismatch: Y is {arr.shape}, X is {X.shape}")
    xty = X.data.T @ arr
    return TangentVector(arr - 0.5 * X.data @ (xty + xty.T), X, check=check)


def polar_retraction(X: StiefelPoint, v: TangentVector, *, check: bool = True) -> StiefelPoint:
    """Polar retraction of a tangent vector: the point on St(n, r) nearest X + v.

    Algebraically equal to (X + v)(I_r + v^T v)^{-1/2}; computed through the
    SVD of X + v, which is numerically stabler when v^T v is near singular
    (the two routes agree to machine precision).  I_r + v^T v is always
    symmetric positive definite, so no failure path exists.

    Args:
        X: Base point.
        v: Tangent vector based at X.
        check: Validate that v is based at X (and the result's orthonormality).

    Returns:
        The retracted point R_X(v); R_X(0) = X.
    """
    if v.base is not X and not np.array_equal(v.base.data, X.data):
        raise ManifoldError("tangent vector is not based at the retraction point")
    u, _, vt = np.linalg.svd(X.data + v.data, full_matrices=False)
    return StiefelPoint(u @ vt, check=check)


def _check_cluster(points: list[StiefelPoint]) -> None:
    if not points:
        raise DimensionError("need a nonempty list of points")
    shape = points[0].shape
    for p in points[1:]:
        if p.shape != shape:
            raise DimensionError(f"mixed shapes in cluster: {p.shape} vs {shape}")


def induced_arithmetic_mean(points: list[StiefelPoint]) -> StiefelPoint:
    """The manifold point minimizing the total squared distance to a cluster.

        argmin_{Y in St(n,r)}  sum_i ||Y - X_i||_F^2

    equals the projection of the Euclidean average onto the manifold, i.e.
    the polar factor of mean(X_i).

    Raises:
        DegenerateMeanError: if the Euclidean mean is rank deficient.
    """
    _check_cluster(points)
    mean = np.mean([p.data for p in points], axis=0)
    return nearest_point(mean)


def consensus_error(points: list[StiefelPoint]) -> float:
    """Total squared distance of a cluster from its induced arithmetic mean.

        sum_i ||X_i - Xhat||_F^2

    Zero exactly when all points coincide; equals N times the squared
    distance of the stacked configuration from the consensus set.
    """
    xhat = induced_arithmetic_mean(points)
    return float(sum(np.linalg.norm(p.data - xhat.data) ** 2 for p in points))


def procrustes_distance(X: StiefelPoint, Xstar: StiefelPoint) -> float:
    """Distance between two points up to a right orthogonal alignment.

        d(X, X*) = min_{Q orthogonal} ||X Q - X*||_F

    The optimal Q is U V^T from the SVD X^T X* = U S V^T.  Invariant under
    right-multiplication of either argument by any r x r orthogonal matrix.
    """
    if X.shape != Xstar.shape:
        raise DimensionError(f"shape mismatch: {X.shape} vs {Xstar.shape}")
    u, _, vt = np.linalg.svd(X.data.T @ Xstar.data)
    q = u @ vt
    return float(np.linalg.norm(X.data @ q - Xstar.data))


@dataclass(frozen=True)
class RegionReport:
    """Outcome of a local-region membership test for a point cluster.

    ``consensus_sq`` is sum_i ||X_i - Xhat||_F^2 (compared against N d1^2),
    ``max_deviation`` is max_i ||X_i - Xhat||_F (compared against d2).
    """

    n_points: int
    delta1: float
    delta2: float
    consensus_sq: float
    max_deviation: float
    in_consensus_ball: bool
    in_deviation_ball: bool

    @property
    def in_region(self) -> bool:
        return self.in_consensus_ball and self.in_deviation_ball


def region_membership(
    points: list[StiefelPoint], delta1: float, delta2: float
) -> RegionReport:
    """Test whether a cluster lies in the local consensus region.

    The region is the intersection of a consensus ball
    (sum_i ||X_i - Xhat||^2 <= N delta1^2) and a per-point deviation ball
    (max_i ||X_i - Xhat|| <= delta2), with the admissibility constraints
    delta1 <= delta2 / (5 sqrt(r)) and delta2 <= 1/6.

    Raises:
        ParameterError: if (delta1, delta2) violate the constraints.
    """
    _check_cluster(points)
    r = points[0].r
    if not 0 < delta2 <= 1.0 / 6.0:
        raise ParameterError(f"delta2 must lie in (0, 1/6], got {delta2}")
    if not 0 < delta1 <= delta2 / (5.0 * math.sqrt(r)):
        raise ParameterError(
            f"delta1 must lie in (0, delta2/(5 sqrt(r))] = "
            f"(0, {delta2 / (5.0 * math.sqrt(r)):.6g}], got {delta1}"
        )
    xhat = induced_arithmetic_mean(points)
    devs = [float(np.linalg.norm(p.data - xhat.data)) for p in points]
    consensus_sq = float(sum(d * d for d in devs))
    max_dev = max(devs)
    return RegionReport(
        n_points=len(points),
        delta1=delta1,
        delta2=delta2,
        consensus_sq=consensus_sq,
        max_deviation=max_dev,
        in_consensus_ball=consensus_sq <= len(points) * delta1**2,
        in_deviation_ball=max_dev <= delta2,
    )
