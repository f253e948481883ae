"""Synchronous multi-agent engines: gradient tracking and the SGD baseline.

Both engines run N agents in lockstep over a fixed mixing topology.  Per
iteration the tracking engine performs, in order:

1. project the tracker onto the tangent space:  v_i = P_{X_i}(Y_i)
2. move:  X_i' = R_{X_i}( alpha * P_{X_i}(sum_j (W^t)_ij X_j) - beta * v_i )
3. draw a fresh batched gradient F_i(X_i') from the oracle
4. track:  Y_i' = sum_j (W^t)_ij Y_j + F_i(X_i') - F_i(X_i)

The exact linear-algebra identity mean_i Y_i = mean_i F_i(X_i) is asserted
after every iteration (the strongest cheap correctness check available for
the tracking update).  The batch size used to evaluate F at the iterate
X_m is N_m from the schedule, for every m including the initial tracker
Y_{i,0} = F_i(X_{i,0}); cumulative samples after k iterations are therefore
exactly N * sum_{j<=k} N_j.

The baseline engine (decentralized Riemannian SGD) takes single-sample
gradients at the current iterate with diminishing steps
beta_k = beta / (k+1)^beta_decay and keeps no tracker.

Communication accounting: the engines count applications of W (the tracking
engine applies W t times to each of the two mixed quantities, so 2t per
iteration; the baseline applies it t times).  Reports multiply by the edge
count, giving 2 t |E| communication rounds per tracking iteration.
"""

from __future__ import annotations

import copy
import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EngineFault
from .network import NetworkSpec, mix, spectral_diagnostics
from .oracles import PcaProblem, SampleSchedule, SamplingOracle
from .stiefel import (
    ORTHONORMALITY_TOL,
    RegionReport,
    StiefelPoint,
    TangentVector,
    orthonormality_defect,
    polar_retraction,
    random_point,
    region_membership,
    tangent_projection,
)

#: Tolerance for the tracker-average identity audit.
TRACKING_TOL = 1e-10


@dataclass
class AgentState:
    """Per-agent state: iterate, ambient tracker, and the last drawn gradient."""

    x: StiefelPoint
    y: np.ndarray
    last_grad: TangentVector


@dataclass(frozen=True)
class AlgoConfig:
    """Engine parameters.

    alpha, beta: consensus and gradient step sizes (constant).
    t: mixing steps per iteration (>= 1).
    schedule: batch-size schedule N_k.
    seed: drives the initial point and all per-agent sample draws.
    audit_every: orthonormality / region re-audit period (iterations).
    init: 'common' (all agents share one random point) or 'independent'.
    beta_decay: baseline-only; step beta / (k+1)^beta_decay.
    delta2 / delta1: local-region radii for membership reports; delta1
        defaults to the largest admissible value delta2 / (5 sqrt(r)).
    """

    alpha: float = 1.0
    beta: float = 0.1
    t: int = 1
    schedule: SampleSchedule = field(default_factory=lambda: SampleSchedule.constant(1))
    max_iters: int = 1000
    seed: int = 0
    audit_every: int = 50
    init: str = "common"
    beta_decay: float = 0.5
    delta2: float = 1.0 / 6.0
    delta1: float | None = None

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.t < 1 or int(self.t) != self.t:
            raise ValueError(f"t must be an integer >= 1, got {self.t}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.audit_every < 1:
            raise ValueError("audit_every must be >= 1")
        if self.init not in ("common", "independent"):
            raise ValueError(f"init must be 'common' or 'independent', got {self.init!r}")
        if self.alpha > 1.0:
            warnings.warn(
                f"alpha = {self.alpha} exceeds the safe step threshold 1; "
                "convergence guarantees may not apply",
                stacklevel=2,
            )

    def region_deltas(self, r: int) -> tuple[float, float]:
        d1 = self.delta1 if self.delta1 is not None else self.delta2 / (5.0 * math.sqrt(r))
        return d1, self.delta2


@dataclass
class RunSummary:
    """Aggregates reported by :meth:`EngineBase.run`."""

    algorithm: str
    iterations: int
    total_samples: int
    w_applications: int
    comm_rounds: int
    min_grad_norm: float | None
    min_grad_norm_sq: float | None
    max_tracker_norm: float
    region_violations: int
    stopped_early: bool


class EngineBase:
    """Shared wiring: initialization, counters, audits, and the run loop."""

    algorithm = "base"
    #: W applications consumed per iteration, as a multiple of t.
    mixes_per_iter = 1

    def __init__(self, problem: PcaProblem, net: NetworkSpec, config: AlgoConfig, oracle=None):
        if problem.n_agents != net.n_agents:
            raise DimensionError(
                f"problem has {problem.n_agents} agents but network has {net.n_agents}"
            )
        self.problem = problem
        self.net = net
        self.config = config
        self.oracle = oracle if oracle is not None else SamplingOracle(problem)

        diag = spectral_diagnostics(net, config.t)
        self.spectral = diag
        if config.t < diag.t_min:
            warnings.warn(
                f"t = {config.t} is below the multi-step consensus bound "
                f"t_min = {diag.t_min}; proceeding (consensus is typically "
                "still reached in practice)",
                stacklevel=2,
            )

        ss = np.random.SeedSequence(config.seed)
        children = ss.spawn(net.n_agents + 1)
        init_rng = np.random.default_rng(children[0])
        self.agent_rngs = [np.random.default_rng(c) for c in children[1:]]

        n, r = problem.n, problem.r
        if config.init == "common":
            x0 = random_point(n, r, init_rng)
            points = [x0] * net.n_agents
        else:
            points = [random_point(n, r, init_rng) for _ in range(net.n_agents)]

        self.k = 0
        self.total_samples = 0
        self.w_applications = 0
        self.max_tracker_norm = 0.0
        self.region_log: list[tuple[int, RegionReport]] = []
        self.states = self._initial_states(points)
        self._record_region()
        self.initial_region = self.region_log[0][1]
        if config.init == "independent" and not self.initial_region.in_region:
            warnings.warn(
                "independent initialization landed outside the local consensus "
                "region; convergence guarantees may not apply",
                stacklevel=2,
            )

    # -- subclass hooks -------------------------------------------------

    def _initial_states(self, points: list[StiefelPoint]) -> list[AgentState]:
        raise NotImplementedError

    def step(self) -> None:
        raise NotImplementedError

    # -- common machinery -------------------------------------------------

    def points(self) -> list[StiefelPoint]:
        return [s.x for s in self.states]

    @property
    def comm_rounds(self) -> int:
        """Cumulative communication rounds: W applications times |E|."""
        return self.w_applications * self.net.n_edges

    def state_digest(self) -> str:
        """SHA-256 over the iterate and tracker bytes (replay comparisons)."""
        h = hashlib.sha256()
        h.update(str(self.k).encode())
        for s in self.states:
            h.update(np.ascontiguousarray(s.x.data).tobytes())
            h.update(np.ascontiguousarray(s.y).tobytes())
        return h.hexdigest()

    def _record_region(self) -> None:
        d1, d2 = self.config.region_deltas(self.problem.r)
        self.region_log.append((self.k, region_membership(self.points(), d1, d2)))

    def _audit(self) -> None:
        for i, s in enumerate(self.states):
            defect = orthonormality_defect(s.x.data)
            if defect > ORTHONORMALITY_TOL:
                raise EngineFault(
                    f"agent {i} drifted off the manifold "
                    f"(||X^T X - I|| = {defect:.3e})",
                    self.k,
                    copy.deepcopy(self.states),
                )
        self._record_region()

    def _post_step(self) -> None:
        self.k += 1
        tracker = max(float(np.linalg.norm(s.y)) for s in self.states)
        self.max_tracker_norm = max(self.max_tracker_norm, tracker)
        if self.k % self.config.audit_every == 0:
            self._audit()

    def run(
        self,
        max_iters: int | None = None,
        metrics_fn=None,
        sink=None,
        log_every: int = 1,
        stop_when=None,
    ) -> RunSummary:
        """Iterate the engine, optionally emitting one metrics row per iteration.

        metrics_fn(engine) -> row is called at iteration 0 and then after
        every ``log_every``-th iteration (and at the final one); ``sink(row)``
        receives each row.  ``stop_when(row) -> bool`` ends the run early.
        Returns the run summary; the minimum gradient norm is tracked over
        the emitted rows (rows expose ``grad_norm``).
        """
        iters = self.config.max_iters if max_iters is None else max_iters
        min_grad: float | None = None
        stopped = False

        def emit() -> bool:
            nonlocal min_grad
            if metrics_fn is None:
                return False
            row = metrics_fn(self)
            g = getattr(row, "grad_norm", None)
            if g is not None and not math.isnan(g):
                min_grad = g if min_grad is None else min(min_grad, g)
            if sink is not None:
                sink(row)
            return stop_when is not None and stop_when(row)

        if emit():
            stopped = True
        else:
            for j in range(iters):
                self.step()
                if (j + 1) % log_every == 0 or j + 1 == iters:
                    if emit():
                        stopped = True
                        break

        return RunSummary(
            algorithm=self.algorithm,
            iterations=self.k,
            total_samples=self.total_samples,
            w_applications=self.w_applications,
            comm_rounds=self.comm_rounds,
            min_grad_norm=min_grad,
            min_grad_norm_sq=None if min_grad is None else min_grad**2,
            max_tracker_norm=self.max_tracker_norm,
            region_violations=sum(1 for _, rep in self.region_log if not rep.in_region),
            stopped_early=stopped,
        )


class DrsgtEngine(EngineBase):
    """Gradient tracking with variable batch sizes (the main algorithm)."""

    algorithm = "drsgt"
    mixes_per_iter = 2  # X-mixing and Y-mixing each use t rounds

    def _initial_states(self, points: list[StiefelPoint]) -> list[AgentState]:
        n0 = self.config.schedule.sample_size(0)
        states = []
        for i, x0 in enumerate(points):
            g = self.oracle.sample(i, x0, n0, self.agent_rngs[i])
            self.total_samples += g.samples_used
            states.append(AgentState(x=x0, y=g.value.data.copy(), last_grad=g.value))
        return states

    def step(self) -> None:
        cfg = self.config
        n_next = cfg.schedule.sample_size(self.k + 1)

        mixed_x = mix(self.net, cfg.t, [s.x.data for s in self.states])
        mixed_y = mix(self.net, cfg.t, [s.y for s in self.states])
        self.w_applications += 2 * cfg.t

        new_states = []
        for i, s in enumerate(self.states):
            consensus = tangent_projection(s.x, mixed_x[i], check=False)
            v = tangent_projection(s.x, s.y, check=False)
            direction = TangentVector(
                cfg.alpha * consensus.data - cfg.beta * v.data, s.x, check=False
            )
            x_new = polar_retraction(s.x, direction, check=False)
            g = self.oracle.sample(i, x_new, n_next, self.agent_rngs[i])
            self.total_samples += g.samples_used
            y_new = mixed_y[i] + g.value.data - s.last_grad.data
            new_states.append(AgentState(x=x_new, y=y_new, last_grad=g.value))

        self.states = new_states
        self._check_tracking()
        self._post_step()

    def _check_tracking(self) -> None:
        y_bar = np.mean([s.y for s in self.states], axis=0)
        f_bar = np.mean([s.last_grad.data for s in self.states], axis=0)
        drift = float(np.linalg.norm(y_bar - f_bar))
        if drift > TRACKING_TOL:
            raise EngineFault(
                f"tracker average drifted from the gradient average "
                f"(||Ybar - Fbar|| = {drift:.3e})",
                self.k,
                copy.deepcopy(self.states),
            )


class DrsgdEngine(EngineBase):
    """Baseline: decentralized Riemannian SGD, single samples, diminishing steps."""

    algorithm = "drsgd"
    mixes_per_iter = 1

    def _initial_states(self, points: list[StiefelPoint]) -> list[AgentState]:
        # No tracker and no startup draw; the zero tangent is a placeholder.
        return [
            AgentState(
                x=x0,
                y=np.zeros(x0.shape),
                last_grad=TangentVector(np.zeros(x0.shape), x0, check=False),
            )
            for x0 in points
        ]

    def step(self) -> None:
        cfg = self.config
        beta_k = cfg.beta / (self.k + 1) ** cfg.beta_decay

        mixed_x = mix(self.net, cfg.t, [s.x.data for s in self.states])
        self.w_applications += cfg.t

        new_states = []
        for i, s in enumerate(self.states):
            consensus = tangent_projection(s.x, mixed_x[i], check=False)
            g = self.oracle.sample(i, s.x, 1, self.agent_rngs[i])
            self.total_samples += g.samples_used
            direction = TangentVector(
                cfg.alpha * consensus.data - beta_k * g.value.data, s.x, check=False
            )
            x_new = polar_retraction(s.x, direction, check=False)
            new_states.append(AgentState(x=x_new, y=g.value.data.copy(), last_grad=g.value))

        self.states = new_states
        self._post_step()


ENGINES = {"drsgt": DrsgtEngine, "drsgd": DrsgdEngine}


def build_engine(
    algorithm: str,
    problem: PcaProblem,
    net: NetworkSpec,
    config: AlgoConfig,
    oracle=None,
) -> EngineBase:
    try:
        cls = ENGINES[algorithm]
    except KeyError:
        raise ValueError(
            f"unknown algorithm {algorithm!r}; expected one of {sorted(ENGINES)}"
        ) from None
    return cls(problem, net, config, oracle=oracle)
