"""Communication graphs, doubly stochastic mixing matrices, and spectral diagnostics.

Mixing weights are Metropolis-Hastings weights, which are symmetric and
doubly stochastic on any connected undirected graph:

    w_ij = 1 / (1 + max(d_i, d_j))   for an edge (i, j)
    w_ii = 1 - sum_{j != i} w_ij
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, TopologyError

Edge = tuple[int, int]

_W_TOL = 1e-12


def _normalize_edges(edges, n_agents: int) -> frozenset[Edge]:
    out = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise TopologyError(f"self-loop ({i}, {j}) is not a valid edge")
        if not (0 <= i < n_agents and 0 <= j < n_agents):
            raise TopologyError(f"edge ({i}, {j}) out of range for {n_agents} agents")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


def _is_connected(n_agents: int, edges: frozenset[Edge]) -> bool:
    adj: list[list[int]] = [[] for _ in range(n_agents)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n_agents


@dataclass(frozen=True)
class NetworkSpec:
    """A connected undirected graph together with its mixing matrix.

    Validated at construction: W symmetric, nonnegative, rows summing to one,
    sparsity pattern matching the edge set, and the graph connected.
    """

    n_agents: int
    edges: frozenset[Edge]
    mixing: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.n_agents
        if n < 2:
            raise TopologyError(f"need at least 2 agents, got {n}")
        w = np.asarray(self.mixing, dtype=np.float64)
        if w.shape != (n, n):
            raise DimensionError(f"mixing matrix shape {w.shape} != ({n}, {n})")
        if np.max(np.abs(w - w.T)) > _W_TOL:
            raise TopologyError("mixing matrix is not symmetric")
        if w.min() < -_W_TOL:
            raise TopologyError("mixing matrix has negative entries")
        if np.max(np.abs(w.sum(axis=1) - 1.0)) > _W_TOL:
            raise TopologyError("mixing matrix rows do not sum to one")
        edges = _normalize_edges(self.edges, n)
        for i in range(n):
            for j in range(i + 1, n):
                positive = w[i, j] > 0.0
                if positive != ((i, j) in edges):
                    raise TopologyError(
                        f"mixing weight pattern disagrees with edge set at ({i}, {j})"
                    )
        if not _is_connected(n, edges):
            raise TopologyError("graph is disconnected")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "mixing", w)

    @property
    def n_edges(self) -> int:
        return len(self.edges)


def metropolis_weights(n_agents: int, edges: frozenset[Edge]) -> np.ndarray:
    degree = [0] * n_agents
    for i, j in edges:
        degree[i] += 1
        degree[j] += 1
    w = np.zeros((n_agents, n_agents))
    for i, j in edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(degree[i], degree[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w


def build_topology(
    kind: str,
    n_agents: int,
    *,
    p: float | None = None,
    seed: int | None = None,
    edges=None,
    max_attempts: int = 1000,
) -> NetworkSpec:
    """Build a named topology with Metropolis-Hastings mixing weights.

    kind: 'ring' | 'complete' | 'star' | 'erdos_renyi' (needs p, seed) |
          'explicit' (needs an edge list).
    Erdos-Renyi graphs are resampled until connected, up to ``max_attempts``.
    """
    if n_agents < 2:
        raise TopologyError(f"need at least 2 agents, got {n_agents}")
    if kind == "ring":
        edge_set = {(i, (i + 1) % n_agents) for i in range(n_agents)}
    elif kind == "complete":
        edge_set = {(i, j) for i in range(n_agents) for j in range(i + 1, n_agents)}
    elif kind == "star":
        edge_set = {(0, i) for i in range(1, n_agents)}
    elif kind == "erdos_renyi":
        if p is None or not 0.0 < p <= 1.0:
            raise TopologyError(f"erdos_renyi needs an edge probability in (0, 1], got {p}")
        rng = np.random.default_rng(seed)
        for _ in range(max_attempts):
            edge_set = {
                (i, j)
                for i in range(n_agents)
                for j in range(i + 1, n_agents)
                if rng.random() < p
            }
            if _is_connected(n_agents, _normalize_edges(edge_set, n_agents)):
                break
        else:
            raise TopologyError(
                f"no connected Erdos-Renyi graph found in {max_attempts} attempts "
                f"(N={n_agents}, p={p})"
            )
    elif kind == "explicit":
        if edges is None:
            raise TopologyError("explicit topology needs an edge list")
        edge_set = set(edges)
    else:
        raise TopologyError(f"unknown topology kind {kind!r}")

    normalized = _normalize_edges(edge_set, n_agents)
    if not _is_connected(n_agents, normalized):
        raise TopologyError(f"{kind} graph on {n_agents} agents is disconnected")
    return NetworkSpec(n_agents, normalized, metropolis_weights(n_agents, normalized))


@dataclass(frozen=True)
class SpectralDiagnostics:
    """Spectral quantities of a mixing matrix that govern consensus.

    sigma2: second largest singular value of W, i.e. the spectral norm of
        W - (1/N) 11^T; in [0, 1) for connected graphs.
    l_t: 1 - (smallest eigenvalue of W^t), in (0, 2].
    t_min: smallest number of mixing steps per iteration for which
        sigma2^t <= 1 / (2 sqrt(N)), i.e. ceil(log_{sigma2} 1/(2 sqrt(N)));
        1 when sigma2 = 0.
    """

    sigma2: float
    l_t: float
    t_min: int


def spectral_diagnostics(net: NetworkSpec, t: int = 1) -> SpectralDiagnostics:
    """Compute sigma2, L_t for the given number of mixing steps, and t_min."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    n = net.n_agents
    w = net.mixing
    deviation = w - np.full((n, n), 1.0 / n)
    sigma2 = float(np.max(np.abs(np.linalg.eigvalsh(deviation))))
    sigma2 = max(sigma2, 0.0)
    wt = np.linalg.matrix_power(w, t)
    l_t = 1.0 - float(np.linalg.eigvalsh(wt)[0])
    if sigma2 < 1e-12:
        t_min = 1
    else:
        t_min = max(1, math.ceil(math.log(1.0 / (2.0 * math.sqrt(n))) / math.log(sigma2)))
    return SpectralDiagnostics(sigma2=sigma2, l_t=l_t, t_min=t_min)


def mix(net: NetworkSpec, t: int, values: list[np.ndarray]) -> list[np.ndarray]:
    """Apply t rounds of weighted averaging: agent i receives sum_j (W^t)_ij V_j.

    Implemented as t successive applications of W (each application is one
    communication round).  Double stochasticity preserves the network-wide
    average exactly.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if len(values) != net.n_agents:
        raise DimensionError(
            f"got {len(values)} values for {net.n_agents} agents"
        )
    stacked = np.stack([np.asarray(v, dtype=np.float64) for v in values])
    for _ in range(t):
        stacked = np.tensordot(net.mixing, stacked, axes=(1, 0))
    return list(stacked)
