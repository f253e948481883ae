"""Gradient oracles for decentralized PCA and batch-size schedules.

Shows the unbiased row-sampling estimator, how its noise shrinks as 1/N_k,
and the three schedule families.
"""

import numpy as np

from drsgt import (
    SampleSchedule,
    generate_pca_instance,
    random_point,
    sample_size,
    stochastic_riemannian_gradient,
)

problem = generate_pca_instance(n_agents=4, m_per_agent=500, n=8, r=3,
                                eigengap=0.8, seed=0)
print("instance: 4 agents x 500 rows, n=8, r=3")
print("optimal value f* =", round(problem.f_star, 6))
print("top eigenvalues of the pooled covariance:", np.round(problem.eigvals[:5], 3))

print("\n== schedules ==")
for text in ("constant:4", "polynomial:1", "geometric:0.9"):
    sched = SampleSchedule.parse(text)
    sizes = [sample_size(sched, k) for k in (0, 1, 5, 20, 50)]
    print(f"{text:15s} N_k at k=0,1,5,20,50 -> {sizes}")

print("\n== sampling noise vs batch size ==")
rng = np.random.default_rng(2)
x = random_point(8, 3, rng)
exact = problem.riemannian_gradient(x, agent=0).data
for batch in (1, 4, 16, 64):
    errs = [
        np.linalg.norm(
            stochastic_riemannian_gradient(problem, 0, x, batch, rng).value.data - exact
        ) ** 2
        for _ in range(2000)
    ]
    print(f"N_k={batch:3d}: mean squared error {np.mean(errs):.5f} "
          f"(1/N_k scaling -> expect ~{np.mean(errs) * batch:.5f} at N_k=1)")

print("\nfull batch recovers the exact gradient:")
from drsgt import full_batch_riemannian_gradient

fb = full_batch_riemannian_gradient(problem, 0, x)
print("||full batch - exact|| =", np.linalg.norm(fb.value.data - exact))
