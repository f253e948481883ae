"""Acceptance suite: one test per primary criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail line
per criterion.  Desk scale throughout: 4 agents, n = 8, r = 3, 200-2500 rows
per agent.  Criteria stated in expectation use 10-seed averages.
"""

import hashlib
import math
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from drsgt import (
    AlgoConfig,
    DrsgtEngine,
    ExactOracle,
    SampleSchedule,
    SyntheticNoiseOracle,
    build_engine,
    build_topology,
    consensus_error,
    generate_pca_instance,
    induced_arithmetic_mean,
    polar_retraction,
    random_point,
    random_tangent,
    stochastic_riemannian_gradient,
    tangent_projection,
)
from drsgt.engine import TRACKING_TOL
from drsgt.experiment import compute_metrics
from drsgt.stiefel import TangentVector, orthonormality_defect, tangency_defect


def report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"ACCEPTANCE {name}: {status}{suffix}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def fig1_problem():
    # the reference protocol instance: 4 agents x 2500 rows, n=8, r=3, gap 0.8
    return generate_pca_instance(4, 2500, 8, 3, 0.8, seed=0)


@pytest.fixture(scope="module")
def ring():
    return build_topology("ring", 4)


# ---------------------------------------------------------------------------
# 1. Geometry invariant suite (1e4 randomized checks each, zero failures)
# ---------------------------------------------------------------------------


def test_geometry_invariant_suite():
    rng = np.random.default_rng(101)
    trials = 10_000
    n, r = 8, 3

    failures = {
        "orthonormality": 0,
        "tangency": 0,
        "idempotence": 0,
        "second_order": 0,
        "nonexpansive": 0,
        "mean_iam": 0,
    }

    for _ in range(trials):
        x = random_point(n, r, rng)
        v = random_tangent(x, rng, norm=rng.uniform(0.0, 1.0))
        if tangency_defect(x.data, v.data) > 1e-10:
            failures["tangency"] += 1

        retracted = polar_retraction(x, v)
        if orthonormality_defect(retracted.data) > 1e-10:
            failures["orthonormality"] += 1
        if np.linalg.norm(retracted.data - (x.data + v.data)) > v.norm**2 + 1e-13:
            failures["second_order"] += 1

        y = random_point(n, r, rng)
        lhs = np.linalg.norm(retracted.data - y.data) ** 2
        rhs = np.linalg.norm(x.data + v.data - y.data) ** 2
        if lhs > rhs + 1e-12:
            failures["nonexpansive"] += 1

        amb = rng.standard_normal((n, r)) * rng.uniform(0.1, 5.0)
        p = tangent_projection(x, amb)
        pp = tangent_projection(x, p.data)
        if np.linalg.norm(pp.data - p.data) > 1e-12:
            failures["idempotence"] += 1

    # mean-vs-cluster-mean bound on tight clusters
    for _ in range(trials):
        base = random_point(n, r, rng)
        points = [
            polar_retraction(base, random_tangent(base, rng, norm=rng.uniform(0.0, 0.3)))
            for _ in range(4)
        ]
        err = consensus_error(points)
        if err > len(points) / 2:
            continue
        xhat = induced_arithmetic_mean(points)
        xbar = np.mean([p.data for p in points], axis=0)
        if np.linalg.norm(xhat.data - xbar) > 2 * math.sqrt(r) * err / len(points) + 1e-12:
            failures["mean_iam"] += 1

    report(
        "geometry-invariants",
        all(v == 0 for v in failures.values()),
        f"failures per 1e4 trials: {failures}",
    )


# ---------------------------------------------------------------------------
# 2. Gradient correctness via finite differences (1e3 pairs, rel err <= 1e-4)
# ---------------------------------------------------------------------------


def test_gradient_finite_difference(fig1_problem):
    rng = np.random.default_rng(202)
    h = 1e-5
    worst = 0.0
    for _ in range(1000):
        x = random_point(fig1_problem.n, fig1_problem.r, rng)
        v = random_tangent(x, rng, norm=1.0)
        ip = float(np.sum(fig1_problem.riemannian_gradient(x).data * v.data))
        stepped = polar_retraction(x, TangentVector(h * v.data, x, check=False))
        fd = (fig1_problem.objective(stepped) - fig1_problem.objective(x)) / h
        # the 1.0 floor guards the regime where the directional derivative is
        # smaller than the O(h) truncation error of the difference quotient
        rel = abs(fd - ip) / max(1.0, abs(ip))
        worst = max(worst, rel)
    report("gradient-finite-difference", worst <= 1e-4, f"worst rel err {worst:.2e}")


# ---------------------------------------------------------------------------
# 3. Tracking identity over 500 iterations, t in {1, 2}, both oracles
# ---------------------------------------------------------------------------


def test_tracking_identity(fig1_problem, ring):
    worst = 0.0
    for t in (1, 2):
        for oracle in (ExactOracle(fig1_problem), None):  # None -> row sampling
            cfg = AlgoConfig(alpha=1.0, beta=0.1, t=t,
                             schedule=SampleSchedule.polynomial(1), seed=11)
            eng = DrsgtEngine(fig1_problem, ring, cfg, oracle=oracle)
            for _ in range(500):
                eng.step()  # engine itself faults above 1e-10
                y_bar = np.mean([s.y for s in eng.states], axis=0)
                f_bar = np.mean([s.last_grad.data for s in eng.states], axis=0)
                worst = max(worst, float(np.linalg.norm(y_bar - f_bar)))
    report("tracking-identity", worst <= TRACKING_TOL, f"max drift {worst:.2e}")


# ---------------------------------------------------------------------------
# 4. Unbiasedness and the sigma^2 / N_k variance law
# ---------------------------------------------------------------------------


def test_unbiasedness_and_variance_law(fig1_problem):
    rng = np.random.default_rng(303)
    sigma = 0.5
    oracle = SyntheticNoiseOracle(fig1_problem, sigma)
    x = random_point(fig1_problem.n, fig1_problem.r, rng)
    exact = fig1_problem.riemannian_gradient(x, 0).data

    ok = True
    details = []
    for batch in (1, 4, 16):
        acc = 0.0
        reps = 10_000
        for _ in range(reps):
            g = oracle.sample(0, x, batch, rng)
            acc += float(np.linalg.norm(g.value.data - exact) ** 2)
        empirical = acc / reps
        target = sigma**2 / batch
        ratio = empirical / target
        details.append(f"N_k={batch}: var ratio {ratio:.3f}")
        ok = ok and 0.8 <= ratio <= 1.2

    # unbiasedness of the row-sampling oracle: 1e5 single draws, 3-sigma
    # componentwise against the exact gradient
    draws = np.empty((100_000,) + x.shape)
    for i in range(draws.shape[0]):
        draws[i] = stochastic_riemannian_gradient(fig1_problem, 0, x, 1, rng).value.data
    mean = draws.mean(axis=0)
    sem = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
    dev = np.abs(mean - exact) / np.maximum(sem, 1e-300)
    details.append(f"max |mean dev| = {dev.max():.2f} sigma")
    ok = ok and bool(np.all(dev <= 3.0))

    report("unbiasedness-variance-law", ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 5. Exact-oracle convergence on the reference protocol
# ---------------------------------------------------------------------------


def test_exact_oracle_convergence(fig1_problem, ring):
    cfg = AlgoConfig(alpha=1.0, beta=0.1, t=1,
                     schedule=SampleSchedule.polynomial(1), seed=0)
    eng = DrsgtEngine(fig1_problem, ring, cfg, oracle=ExactOracle(fig1_problem))
    hit = None
    k_grad_sq = []
    for k in range(1000):
        eng.step()
        row = compute_metrics(fig1_problem, eng.points(), eng.k,
                              eng.total_samples, eng.comm_rounds)
        k_grad_sq.append((k + 1) * row.grad_norm**2)
        if hit is None and row.grad_norm <= 1e-6 and row.consensus <= 1e-8:
            hit = k + 1
    # empirical O(1/k): k * grad^2 attains its maximum early
    bounded = max(k_grad_sq[50:]) <= max(k_grad_sq[:50])
    report(
        "exact-oracle-convergence",
        hit is not None and bounded,
        f"thresholds met at k={hit}, max k*grad^2 = {max(k_grad_sq):.3g}",
    )


# ---------------------------------------------------------------------------
# 6. Schedule ordering at k = 500 over 10 seeds
# ---------------------------------------------------------------------------


def _final_grad_norm(problem, net, algorithm, schedule, seed, iters,
                     oracle=None, beta=0.1):
    cfg = AlgoConfig(alpha=1.0, beta=beta, t=1, schedule=schedule, seed=seed)
    eng = build_engine(algorithm, problem, net, cfg, oracle=oracle)
    for _ in range(iters):
        eng.step()
    row = compute_metrics(problem, eng.points(), eng.k,
                          eng.total_samples, eng.comm_rounds)
    return row


def test_schedule_ordering(fig1_problem, ring):
    schedules = {
        "constant": SampleSchedule.constant(1),
        "polynomial": SampleSchedule.polynomial(1),
        "geometric": SampleSchedule.geometric(0.9),
    }
    grads = {name: [] for name in schedules}
    for seed in range(10):
        for name, sched in schedules.items():
            row = _final_grad_norm(fig1_problem, ring, "drsgt", sched, seed, 500)
            grads[name].append(row.grad_norm)

    def gmean(values):
        return math.exp(float(np.mean(np.log(values))))

    mean = {name: float(np.mean(v)) for name, v in grads.items()}
    gap_cp = gmean([c / p for c, p in zip(grads["constant"], grads["polynomial"])])
    gap_pg = gmean([p / g for p, g in zip(grads["polynomial"], grads["geometric"])])
    ordered = mean["geometric"] <= mean["polynomial"] <= mean["constant"]
    report(
        "schedule-ordering",
        ordered and gap_cp >= 2.0 and gap_pg >= 2.0,
        f"means const={mean['constant']:.3e} poly={mean['polynomial']:.3e} "
        f"geo={mean['geometric']:.3e}; gaps {gap_cp:.1f}x, {gap_pg:.2g}x",
    )


# ---------------------------------------------------------------------------
# 7. Noise floor scales as c / Q (synthetic oracle, iterations 800-1000)
# ---------------------------------------------------------------------------


def test_noise_floor_scaling():
    problem = generate_pca_instance(4, 500, 8, 3, 0.8, seed=0)
    net = build_topology("ring", 4)
    sigma = 0.3
    plateaus = {}
    for q in (1, 4, 16):
        per_seed = []
        for seed in range(10):
            cfg = AlgoConfig(alpha=1.0, beta=0.1, t=1,
                             schedule=SampleSchedule.constant(q), seed=seed)
            eng = DrsgtEngine(problem, net, cfg, oracle=SyntheticNoiseOracle(problem, sigma))
            acc = []
            for k in range(1000):
                eng.step()
                if k + 1 >= 800:
                    row = compute_metrics(problem, eng.points(), eng.k,
                                          eng.total_samples, eng.comm_rounds)
                    acc.append(row.grad_norm**2)
            per_seed.append(float(np.mean(acc)))
        plateaus[q] = float(np.mean(per_seed))

    c = float(np.mean([q * p for q, p in plateaus.items()]))
    ratios = {q: plateaus[q] / (c / q) for q in plateaus}
    ok = all(0.5 <= r <= 1.5 for r in ratios.values())
    report(
        "noise-floor-scaling",
        ok,
        "Q*plateau/c: " + ", ".join(f"Q={q}: {r:.3f}" for q, r in ratios.items()),
    )


# ---------------------------------------------------------------------------
# 8. Tracking beats the baseline by >= 5x on the reference protocol
# ---------------------------------------------------------------------------


def test_tracking_beats_baseline(fig1_problem, ring):
    f_gaps = {"drsgt": [], "drsgd": []}
    grads = {"drsgt": [], "drsgd": []}
    for seed in range(10):
        for algo in ("drsgt", "drsgd"):
            sched = SampleSchedule.polynomial(1) if algo == "drsgt" else SampleSchedule.constant(1)
            row = _final_grad_norm(fig1_problem, ring, algo, sched, seed, 1000)
            f_gaps[algo].append(row.f_gap)
            grads[algo].append(row.grad_norm)
    f_ratio = float(np.mean(f_gaps["drsgd"])) / float(np.mean(f_gaps["drsgt"]))
    g_ratio = float(np.mean(grads["drsgd"])) / float(np.mean(grads["drsgt"]))
    report(
        "tracking-beats-baseline",
        f_ratio >= 5.0 and g_ratio >= 5.0,
        f"f_gap ratio {f_ratio:.1f}x, grad ratio {g_ratio:.1f}x",
    )


# ---------------------------------------------------------------------------
# 9. Accounting exactness for all three schedule kinds
# ---------------------------------------------------------------------------


def test_accounting_exactness():
    problem = generate_pca_instance(4, 200, 8, 3, 0.8, seed=3)
    net = build_topology("ring", 4)
    iters = 60
    ok = True
    details = []

    for name, sched in (
        ("constant", SampleSchedule.constant(3)),
        ("polynomial", SampleSchedule.polynomial(1)),
        ("geometric", SampleSchedule.geometric(0.9)),
    ):
        cfg = AlgoConfig(alpha=1.0, beta=0.1, t=2, schedule=sched, seed=1)
        eng = DrsgtEngine(problem, net, cfg)
        rows = []
        summary = eng.run(
            max_iters=iters,
            metrics_fn=lambda e: compute_metrics(e.problem, e.points(), e.k,
                                                 e.total_samples, e.comm_rounds),
            sink=rows.append,
        )
        for row in rows:
            k = row.k
            if name == "constant":
                expected = 4 * 3 * (k + 1)
            elif name == "polynomial":
                expected = 4 * (k + 1) * (k + 2) // 2  # sum of j+1 for j <= k
            else:
                q = Fraction(0.9)
                expected = 4 * sum(math.ceil(Fraction(1, 1) / q**j) for j in range(k + 1))
                # closed-form sandwich: sum_j (1/q)^j <= sum N_j < that + (k+1)
                geo = (Fraction(1, 1) / q ** (k + 1) - 1) / (Fraction(1, 1) / q - 1)
                ok = ok and (4 * geo <= expected < 4 * (geo + k + 1))
            ok = ok and row.samples_cum == expected
            ok = ok and row.comm_rounds_cum == 2 * cfg.t * net.n_edges * k
        details.append(f"{name}: final samples {rows[-1].samples_cum}")
        ok = ok and summary.comm_rounds == 2 * cfg.t * net.n_edges * iters

    report("accounting-exactness", ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 10. Determinism across processes
# ---------------------------------------------------------------------------


def test_determinism_across_processes(tmp_path):
    cfg_text = """
    n_agents = 4
    m_per_agent = 500
    n = 8
    r = 3
    eigengap = 0.8
    topology = ring
    t = 1
    algorithm = drsgt
    alpha = 1.0
    beta = 0.1
    schedule = polynomial:1
    oracle = sampling
    max_iters = 150
    seed = 9
    output = run.csv
    """
    cfg = tmp_path / "det.cfg"
    cfg.write_text(cfg_text)
    digests = []
    for sub in ("p1", "p2"):
        out = tmp_path / sub
        out.mkdir()
        proc = subprocess.run(
            [sys.executable, "-m", "drsgt.cli", "run", str(cfg), "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        digests.append(hashlib.sha256((out / "run.csv").read_bytes()).hexdigest())
    report("determinism", digests[0] == digests[1], f"digest {digests[0][:16]}...")
