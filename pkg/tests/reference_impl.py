"""Straight-line re-implementation of the tracking iteration, used as a test
oracle for the engine.

Deliberately naive and self-contained: dense matrix powers instead of
repeated mixing, the closed-form (X + v)(I + v^T v)^{-1/2} retraction
instead of the SVD route, and plain loops.  Nothing here imports the
package under test.
"""

from __future__ import annotations

import numpy as np


def metropolis(n_agents: int, edges) -> np.ndarray:
    deg = [0] * n_agents
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    w = np.zeros((n_agents, n_agents))
    for i, j in edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(n_agents):
        w[i, i] = 1.0 - w[i].sum()
    return w


def project(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    s = x.T @ y
    return y - 0.5 * x @ (s + s.T)


def retract(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    r = x.shape[1]
    g = np.eye(r) + v.T @ v
    vals, vecs = np.linalg.eigh(g)
    inv_sqrt = vecs @ np.diag(vals**-0.5) @ vecs.T
    return (x + v) @ inv_sqrt


def run_tracking(
    covs: list[np.ndarray],
    w: np.ndarray,
    x0: np.ndarray,
    alpha: float,
    beta: float,
    t: int,
    n_iters: int,
) -> list[float]:
    """Run the exact-gradient tracking iteration; returns the global
    Riemannian gradient norm at the (identical-initialization) mean iterate
    after every iteration."""
    n_agents = len(covs)
    cov_mean = sum(covs) / n_agents
    wt = np.linalg.matrix_power(w, t)

    def grad(i, x):
        return project(x, -(covs[i] @ x))

    xs = [x0.copy() for _ in range(n_agents)]
    ys = [grad(i, xs[i]) for i in range(n_agents)]
    last = [y.copy() for y in ys]

    norms = []
    for _ in range(n_iters):
        mixed_x = [sum(wt[i, j] * xs[j] for j in range(n_agents)) for i in range(n_agents)]
        mixed_y = [sum(wt[i, j] * ys[j] for j in range(n_agents)) for i in range(n_agents)]
        new_xs = []
        for i in range(n_agents):
            direction = alpha * project(xs[i], mixed_x[i]) - beta * project(xs[i], ys[i])
            new_xs.append(retract(xs[i], direction))
        new_ys = []
        for i in range(n_agents):
            g = grad(i, new_xs[i])
            new_ys.append(mixed_y[i] + g - last[i])
            last[i] = g
        xs, ys = new_xs, new_ys

        mean = sum(xs) / n_agents
        u, _, vt = np.linalg.svd(mean, full_matrices=False)
        xhat = u @ vt
        norms.append(float(np.linalg.norm(project(xhat, -(cov_mean @ xhat)))))
    return norms
