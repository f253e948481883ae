"""Stochastic Riemannian gradient oracles and sample-size schedules.

The workhorse problem is decentralized PCA: agent i holds a data matrix
A_i (m_i x n) and the network minimizes

    f(X) = (1/N) sum_i f_i(X),   f_i(X) = -(1/2) tr(X^T A_i^T A_i X)

over St(n, r).  The global minimizer is any orthonormal basis X* of the
top-r eigenspace of sum_i A_i^T A_i, with optimal value
f* = -(1/(2N)) sum_{j<=r} lambda_j.

Three oracle flavors share the interface ``sample(agent, X, n_samples, rng)``:

- ``SamplingOracle``: unbiased row sampling with replacement; the per-row
  estimate -m_i a a^T X has expectation exactly nabla f_i(X) = -A_i^T A_i X.
  Sample means are projected once after averaging, which equals the average
  of the projected per-sample gradients by linearity of the projection.
- ``ExactOracle``: the noiseless limit (deterministic), preserving the same
  sample accounting as the stochastic oracle.
- ``SyntheticNoiseOracle``: exact gradient plus projected Gaussian noise of
  exactly known per-sample variance sigma^2, so the sigma^2 / N_k
  batch-variance law can be verified without estimation error.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import DimensionError, OracleError, ParameterError, ScheduleError
from .stiefel import StiefelPoint, TangentVector, nearest_point, tangent_projection

# Batch-size regimes for row sampling.  Up to _DIRECT_MAX rows the indices
# are drawn directly; up to _MULTINOMIAL_MAX the per-row counts are drawn
# from the exact multinomial; beyond that (counts no longer fit an int64)
# the count fluctuations are drawn from a Gaussian with the exact
# multinomial covariance, whose total-variation error is negligible at
# that scale.
_DIRECT_MAX = 64
_MULTINOMIAL_MAX = 2**62


# ---------------------------------------------------------------------------
# Sample-size schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleSchedule:
    """Per-iteration mini-batch sizes N_k.

    kind 'constant':   N_k = Q                      (Q >= 1 integer)
    kind 'polynomial': N_k = floor((k+1)^a)         (a > 0)
    kind 'geometric':  N_k = ceil(q^{-k})           (q in (0, 1))

    Geometric sizes are evaluated in exact rational arithmetic over the
    binary-float value of q, so the ceiling is reproducible and cumulative
    sample counts admit exact integer verification.  Rounding conventions:
    floor for polynomial (so a = 1 gives exactly k+1) and ceiling for
    geometric (so N_k >= q^{-k} and the variance bound sigma^2 q^k holds).
    """

    kind: str
    size: int | None = None  # constant Q
    a: float | None = None  # polynomial exponent
    q: float | None = None  # geometric ratio

    def __post_init__(self):
        if self.kind == "constant":
            if self.size is None or int(self.size) != self.size or self.size < 1:
                raise ScheduleError(f"constant schedule needs an integer Q >= 1, got {self.size}")
        elif self.kind == "polynomial":
            if self.a is None or not self.a > 0:
                raise ScheduleError(f"polynomial schedule needs a > 0, got {self.a}")
        elif self.kind == "geometric":
            if self.q is None or not 0.0 < self.q < 1.0:
                raise ScheduleError(f"geometric schedule needs q in (0, 1), got {self.q}")
        else:
            raise ScheduleError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def constant(cls, size: int) -> "SampleSchedule":
        return cls("constant", size=size)

    @classmethod
    def polynomial(cls, a: float) -> "SampleSchedule":
        return cls("polynomial", a=a)

    @classmethod
    def geometric(cls, q: float) -> "SampleSchedule":
        return cls("geometric", q=q)

    @classmethod
    def parse(cls, text: str) -> "SampleSchedule":
        """Parse 'constant:<Q>' | 'polynomial:<a>' | 'geometric:<q>'."""
        kind, sep, arg = text.partition(":")
        kind = kind.strip()
        if not sep or not arg.strip():
            raise ScheduleError(f"schedule {text!r} is missing its parameter")
        arg = arg.strip()
        try:
            if kind == "constant":
                return cls.constant(int(arg))
            if kind == "polynomial":
                return cls.polynomial(float(arg))
            if kind == "geometric":
                return cls.geometric(float(arg))
        except ValueError as exc:
            raise ScheduleError(f"bad schedule parameter in {text!r}: {exc}") from None
        raise ScheduleError(f"unknown schedule kind {kind!r}")

    def sample_size(self, k: int) -> int:
        return sample_size(self, k)

    def __str__(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.size}"
        if self.kind == "polynomial":
            return f"polynomial:{self.a:g}"
        return f"geometric:{self.q:g}"


def sample_size(sched: SampleSchedule, k: int) -> int:
    """Batch size N_k for iteration index k >= 0 (always >= 1)."""
    if k < 0:
        raise ScheduleError(f"iteration index must be >= 0, got {k}")
    if sched.kind == "constant":
        return int(sched.size)
    if sched.kind == "polynomial":
        return max(1, math.floor((k + 1) ** sched.a))
    # geometric: exact ceil of (1/q)^k for the binary-float value of q
    return max(1, math.ceil(Fraction(1, 1) / Fraction(sched.q) ** k))


# ---------------------------------------------------------------------------
# PCA problem instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradientSample:
    """A batched gradient estimate and the number of samples charged for it."""

    value: TangentVector
    samples_used: int


class PcaProblem:
    """A decentralized PCA instance with cached covariances and optimum.

    Holds per-agent data matrices A_i, the cached per-agent covariances
    C_i = A_i^T A_i, the top-r eigenpairs of sum_i C_i, the optimal value
    f*, and an optimal point X*.  Immutable after construction.
    """

    def __init__(self, data: list[np.ndarray], r: int):
        if not data:
            raise OracleError("need at least one agent data matrix")
        mats = []
        n = None
        for i, a in enumerate(data):
            arr = np.asarray(a, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] == 0:
                raise OracleError(f"agent {i} data matrix must be a nonempty 2-d matrix")
            if n is None:
                n = arr.shape[1]
            elif arr.shape[1] != n:
                raise DimensionError(
                    f"agent {i} has feature dimension {arr.shape[1]}, expected {n}"
                )
            arr = arr.copy()
            arr.flags.writeable = False
            mats.append(arr)
        if not 0 < r < n:
            raise ParameterError(f"need 0 < r < n, got r={r}, n={n}")

        self.data = mats
        self.r = int(r)
        self.n = int(n)
        self.n_agents = len(mats)
        self._row_bounds: list[float] | None = None
        self.cov = []
        for arr in mats:
            c = arr.T @ arr
            c.flags.writeable = False
            self.cov.append(c)
        total = np.sum(self.cov, axis=0)
        total.flags.writeable = False
        self.cov_total = total

        eigvals, eigvecs = np.linalg.eigh(total)
        order = np.argsort(eigvals)[::-1]
        self.eigvals = eigvals[order]
        self.eigvals.flags.writeable = False
        self.f_star = float(-np.sum(self.eigvals[: self.r]) / (2.0 * self.n_agents))
        self.x_star = StiefelPoint(eigvecs[:, order[: self.r]])

        residual = self.riemannian_gradient(self.x_star).norm
        if residual > 1e-8:
            raise ParameterError(
                f"instance is ill-posed: ||grad f(X*)|| = {residual:.3e} > 1e-8 "
                "(near-degenerate top-r eigenspace)"
            )

    def m(self, agent: int) -> int:
        return self.data[agent].shape[0]

    def row_norm_bound(self, agent: int) -> float:
        """m_i times the largest squared row norm: a uniform bound on any
        per-row gradient estimate emitted for this agent."""
        if self._row_bounds is None:
            self._row_bounds = [
                float(a.shape[0] * np.max(np.einsum("ij,ij->i", a, a))) for a in self.data
            ]
        return self._row_bounds[agent]

    # -- objective values ---------------------------------------------------

    def agent_objective(self, agent: int, X: StiefelPoint) -> float:
        """f_i(X) = -(1/2) tr(X^T C_i X)."""
        return float(-0.5 * np.sum(X.data * (self.cov[agent] @ X.data)))

    def objective(self, X: StiefelPoint) -> float:
        """f(X) = -(1/(2N)) tr(X^T (sum_i C_i) X)."""
        return float(
            -0.5 * np.sum(X.data * (self.cov_total @ X.data)) / self.n_agents
        )

    # -- exact gradients ----------------------------------------------------

    def euclidean_gradient(self, X: StiefelPoint, agent: int | None = None) -> np.ndarray:
        """nabla f_i(X) = -C_i X, or the global nabla f(X) when agent is None."""
        if agent is None:
            return -(self.cov_total @ X.data) / self.n_agents
        return -(self.cov[agent] @ X.data)

    def riemannian_gradient(self, X: StiefelPoint, agent: int | None = None) -> TangentVector:
        """Projection of the Euclidean gradient onto the tangent space at X."""
        return tangent_projection(X, self.euclidean_gradient(X, agent), check=False)


def exact_riemannian_gradient(
    problem: PcaProblem, X: StiefelPoint, agent: int | None = None
) -> TangentVector:
    """Exact Riemannian gradient of f_i (or of the global f when agent is None)."""
    return problem.riemannian_gradient(X, agent)


def generate_pca_instance(
    n_agents: int,
    m_per_agent: int,
    n: int,
    r: int,
    eigengap: float,
    seed: int,
) -> PcaProblem:
    """Draw a synthetic PCA instance with a controlled covariance eigengap.

    Rows are x = diag(lambda)^{1/2} z / sqrt(m_per_agent) with z standard
    normal and lambda_j = 1 for j <= r, lambda_j = 1 - eigengap for j > r,
    so each agent covariance A_i^T A_i concentrates near diag(lambda) and
    the population gap lambda_r - lambda_{r+1} equals ``eigengap``.  (The
    1/sqrt(m) row scaling keeps gradients O(1) regardless of the number of
    rows, so step sizes transfer across data sizes.)  The full row pool of
    n_agents * m_per_agent samples is drawn at once and split evenly across
    agents.

    Raises:
        ParameterError: if eigengap is outside (0, 1] or r >= n.
    """
    if not 0.0 < eigengap <= 1.0:
        raise ParameterError(f"eigengap must lie in (0, 1], got {eigengap}")
    if not 0 < r < n:
        raise ParameterError(f"need 0 < r < n, got r={r}, n={n}")
    if m_per_agent < 1 or n_agents < 1:
        raise ParameterError("need at least one agent and one row per agent")
    rng = np.random.default_rng(seed)
    lam = np.concatenate([np.ones(r), np.full(n - r, 1.0 - eigengap)])
    rows = rng.standard_normal((n_agents * m_per_agent, n)) * np.sqrt(lam)
    rows /= math.sqrt(m_per_agent)
    return PcaProblem(
        [rows[i * m_per_agent : (i + 1) * m_per_agent] for i in range(n_agents)], r
    )


# ---------------------------------------------------------------------------
# Instance serialization (binary cache, see README for the layout)
# ---------------------------------------------------------------------------

_CACHE_MAGIC = b"PCAC"
_CACHE_VERSION = 1


def save_instance(problem: PcaProblem, path) -> None:
    """Write an instance to a binary cache: shape header + row-major doubles."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<III", _CACHE_VERSION, problem.n_agents, 0))
        fh.write(struct.pack("<II", problem.n, problem.r))
        for arr in problem.data:
            fh.write(struct.pack("<I", arr.shape[0]))
        for arr in problem.data:
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_instance(path) -> PcaProblem:
    """Read an instance written by :func:`save_instance` (caches recomputed)."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _CACHE_MAGIC:
            raise OracleError(f"{path} is not an instance cache file")
        version, n_agents, _ = struct.unpack("<III", fh.read(12))
        if version != _CACHE_VERSION:
            raise OracleError(f"unsupported cache version {version} in {path}")
        n, r = struct.unpack("<II", fh.read(8))
        ms = [struct.unpack("<I", fh.read(4))[0] for _ in range(n_agents)]
        data = []
        for m in ms:
            buf = fh.read(8 * m * n)
            data.append(np.frombuffer(buf, dtype=np.float64).reshape(m, n))
    return PcaProblem(data, r)


# ---------------------------------------------------------------------------
# Stochastic oracles
# ---------------------------------------------------------------------------


def _sampled_euclidean_gradient(
    a: np.ndarray, x: np.ndarray, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Mean of n_samples i.i.d. per-row estimates of -A^T A X.

    Rows are drawn uniformly with replacement.  Small batches draw indices
    directly; large batches draw the (distributionally identical) per-row
    multinomial counts; batches beyond int64 range draw the count
    fluctuations from a Gaussian with the exact multinomial covariance.
    """
    m = a.shape[0]
    ax = a @ x
    if n_samples <= _DIRECT_MAX:
        idx = rng.integers(0, m, size=int(n_samples))
        picked = a[idx]
        acc = picked.T @ (picked @ x)
        return -(m / n_samples) * acc
    if n_samples <= _MULTINOMIAL_MAX:
        counts = rng.multinomial(int(n_samples), np.full(m, 1.0 / m))
        acc = a.T @ (counts[:, None].astype(np.float64) * ax)
        return -(m / float(n_samples)) * acc
    # Count fluctuations around the mean n/m: delta = sqrt(n/m) (z - mean(z))
    # has exactly the multinomial covariance n (I/m - 11^T/m^2).
    z = rng.standard_normal(m)
    scale = math.sqrt(m / float(n_samples))  # 0.0 if n_samples overflows float
    base = a.T @ ax
    noise = a.T @ ((z - z.mean())[:, None] * ax)
    return -(base + scale * noise)


def stochastic_riemannian_gradient(
    problem: PcaProblem,
    agent: int,
    X: StiefelPoint,
    n_samples: int,
    rng: np.random.Generator,
) -> GradientSample:
    """Draw a batched stochastic Riemannian gradient for one agent.

    Each of the n_samples draws picks a row a of A_i uniformly with
    replacement and contributes the unbiased Euclidean estimate
    -m_i a a^T X; the batch mean is projected onto the tangent space
    (projection after averaging equals the average of projections).
    """
    if n_samples < 1:
        raise OracleError(f"need n_samples >= 1, got {n_samples}")
    euclid = _sampled_euclidean_gradient(problem.data[agent], X.data, n_samples, rng)
    value = tangent_projection(X, euclid, check=False)
    if __debug__ and n_samples <= _MULTINOMIAL_MAX:
        # exact-sampling regimes emit convex combinations of per-row
        # estimates, each bounded in norm by m * max row norm^2; the
        # projection is non-expansive (the CLT regime approximates counts
        # and is excluded)
        assert float(np.linalg.norm(value.data)) <= problem.row_norm_bound(agent) + 1e-9
    return GradientSample(value, int(n_samples))


def full_batch_riemannian_gradient(
    problem: PcaProblem, agent: int, X: StiefelPoint
) -> GradientSample:
    """Test hook: the row-sampling estimator forced to visit every row once.

    Algebraically identical to the exact gradient of f_i; exercises the
    estimator path rather than the cached covariance.
    """
    a = problem.data[agent]
    m = a.shape[0]
    acc = a.T @ (a @ X.data)  # every row exactly once, unit counts
    euclid = -(m / float(m)) * acc
    return GradientSample(tangent_projection(X, euclid, check=False), m)


class SamplingOracle:
    """Row-sampling stochastic gradient oracle for a PCA instance."""

    def __init__(self, problem: PcaProblem):
        self.problem = problem

    def sample(
        self, agent: int, X: StiefelPoint, n_samples: int, rng: np.random.Generator
    ) -> GradientSample:
        return stochastic_riemannian_gradient(self.problem, agent, X, n_samples, rng)

    def exact(self, agent: int, X: StiefelPoint) -> TangentVector:
        return self.problem.riemannian_gradient(X, agent)


class ExactOracle:
    """Noiseless oracle: always returns the exact per-agent gradient.

    ``samples_used`` still reports the requested batch size so that sample
    accounting matches the configured schedule (the oracle stands in for
    the infinite-sample limit).
    """

    def __init__(self, problem: PcaProblem):
        self.problem = problem

    def sample(
        self, agent: int, X: StiefelPoint, n_samples: int, rng: np.random.Generator
    ) -> GradientSample:
        if n_samples < 1:
            raise OracleError(f"need n_samples >= 1, got {n_samples}")
        return GradientSample(self.problem.riemannian_gradient(X, agent), int(n_samples))

    def exact(self, agent: int, X: StiefelPoint) -> TangentVector:
        return self.problem.riemannian_gradient(X, agent)


class SyntheticNoiseOracle:
    """Exact gradient plus projected Gaussian noise of known variance.

    A single sample is grad f_i(X) + P_X(c Z) with Z i.i.d. standard normal
    and c = sigma / sqrt(dim T_X), so E||noise||_F^2 = sigma^2 exactly; a
    batch of N_k i.i.d. samples is drawn as one projected Gaussian scaled by
    1/sqrt(N_k), which has the identical distribution.
    """

    def __init__(self, problem: PcaProblem, sigma: float):
        if sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {sigma}")
        self.problem = problem
        self.sigma = float(sigma)
        n, r = problem.n, problem.r
        self.tangent_dim = n * r - r * (r + 1) // 2

    def sample(
        self, agent: int, X: StiefelPoint, n_samples: int, rng: np.random.Generator
    ) -> GradientSample:
        if n_samples < 1:
            raise OracleError(f"need n_samples >= 1, got {n_samples}")
        exact = self.problem.riemannian_gradient(X, agent)
        scale = self.sigma / math.sqrt(self.tangent_dim * float(n_samples))
        noise = tangent_projection(X, rng.standard_normal(X.shape), check=False)
        value = TangentVector(exact.data + scale * noise.data, X, check=False)
        return GradientSample(value, int(n_samples))

    def exact(self, agent: int, X: StiefelPoint) -> TangentVector:
        return self.problem.riemannian_gradient(X, agent)


def make_oracle(problem: PcaProblem, descriptor: str):
    """Build an oracle from a config string: 'sampling' | 'exact' | 'synthetic:<sigma>'."""
    kind, _, arg = descriptor.partition(":")
    kind = kind.strip()
    if kind == "sampling":
        return SamplingOracle(problem)
    if kind == "exact":
        return ExactOracle(problem)
    if kind == "synthetic":
        try:
            sigma = float(arg)
        except ValueError:
            raise ParameterError(f"synthetic oracle needs a numeric sigma, got {arg!r}") from None
        return SyntheticNoiseOracle(problem, sigma)
    raise ParameterError(f"unknown oracle kind {descriptor!r}")


# ---------------------------------------------------------------------------
# Per-instance bounds and diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceBounds:
    """Loose per-instance constants used by boundedness audits.

    sample_norm: uniform bound on the Frobenius norm of any emitted sample
        (max_i m_i * max row norm^2, which also dominates the exact
        gradients).
    lipschitz_fun: L_g such that |f(Y) - f(X) - <grad f(X), Y - X>| is at
        most (L_g / 2) ||Y - X||_F^2 on the manifold.
    lipschitz_grad: L_G such that the Riemannian gradient is L_G-Lipschitz
        in the embedded sense.
    """

    sample_norm: float
    lipschitz_fun: float
    lipschitz_grad: float

    @property
    def tracker_bound(self) -> float:
        """Uniform bound 10 A + L_G on tracker norms for conservative runs."""
        return 10.0 * self.sample_norm + self.lipschitz_grad


def instance_bounds(problem: PcaProblem) -> InstanceBounds:
    row_bound = max(problem.row_norm_bound(i) for i in range(problem.n_agents))
    spec_norms = [float(np.linalg.norm(c, 2)) for c in problem.cov]
    l_smooth = max(spec_norms)
    grad_bound = l_smooth * math.sqrt(problem.r)
    return InstanceBounds(
        sample_norm=max(row_bound, grad_bound),
        lipschitz_fun=2.0 * l_smooth,
        lipschitz_grad=3.0 * l_smooth,
    )


def estimate_sigma(
    problem: PcaProblem, n_draws: int = 2000, seed: int = 0
) -> float:
    """Empirical per-sample noise level of the row-sampling oracle.

    Returns sqrt of the average over agents of E||G - grad f_i||_F^2,
    estimated with single-sample draws at a random point.  Purely a
    diagnostic; uses its own generator.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD1A6)))
    x = nearest_point(rng.standard_normal((problem.n, problem.r)))
    total = 0.0
    for agent in range(problem.n_agents):
        exact = problem.riemannian_gradient(x, agent).data
        acc = 0.0
        for _ in range(n_draws):
            g = stochastic_riemannian_gradient(problem, agent, x, 1, rng)
            acc += float(np.linalg.norm(g.value.data - exact) ** 2)
        total += acc / n_draws
    return math.sqrt(total / problem.n_agents)
