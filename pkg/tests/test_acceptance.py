"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``criterion N: PASS|FAIL ...`` line straight to the
terminal, so ``pytest tests/test_acceptance.py`` doubles as a report.
"""

import math
import time

import numpy as np
import pytest
from scipy import optimize, special, stats

from featuredp.audit import ScalarProblem, attribute_suite, fdp_sgd_game, nonamplification_demo
from featuredp.harness.sweep import SweepSpec, run_sweep
from featuredp.harness.synth import purchase_like, strongly_convex_quadratic
from featuredp.sgd import Batch, TrainConfig, logistic_split, public_view, quadratic_split, train_fdp_sgd
from featuredp.tradeoff import (
    DominatingPair,
    MechanismSpec,
    PrivacyParams,
    accounted_curve,
    calibrate_sigma,
    compose,
    gaussian_tradeoff,
    mc_estimate_pair,
    subsampled_gaussian_tradeoff,
    sup_distance,
    to_epsilon,
)


@pytest.fixture
def verdict(capsys):
    def say(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return say


def gaussian_epsilon(mu: float, delta: float) -> float:
    """Solve the closed-form Gaussian delta(eps) for eps."""
    def gap(eps):
        return stats.norm.cdf(mu / 2 - eps / mu) - math.exp(eps) * stats.norm.cdf(-mu / 2 - eps / mu) - delta
    if gap(0.0) <= 0:
        return 0.0
    return optimize.brentq(gap, 0.0, 200.0, xtol=1e-12)


def test_criterion_1_gaussian_accountant(verdict):
    t0 = time.perf_counter()
    worst = 0.0
    for mu in (0.5, 1.0, 2.0, 4.0):
        curve = gaussian_tradeoff(mu)
        for delta in (1e-5, 1e-3, 0.1269):
            worst = max(worst, abs(to_epsilon(curve, delta) - gaussian_epsilon(mu, delta)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed < 1.0
    verdict(1, ok, f"max |d eps| = {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 1e-3
    assert elapsed < 1.0


def test_criterion_2_composition(verdict):
    t0 = time.perf_counter()
    composed = compose([DominatingPair.gaussian(0.1)] * 100)
    target = gaussian_tradeoff(1.0)
    sup = sup_distance(composed, target)
    d_eps = abs(to_epsilon(composed, 1e-5) - to_epsilon(target, 1e-5))
    elapsed = time.perf_counter() - t0
    ok = sup <= 1e-2 and d_eps <= 1e-2 and elapsed < 10.0
    verdict(2, ok, f"sup = {sup:.2e}, |d eps| = {d_eps:.2e}, {elapsed:.2f} s")
    assert sup <= 1e-2 and d_eps <= 1e-2
    assert elapsed < 10.0


@pytest.mark.parametrize("p,ratio", [(0.01, 1.0), (0.1, 1.0), (0.5, 0.5)])
def test_criterion_3_subsampled_gaussian_vs_monte_carlo(verdict, p, ratio):
    t0 = time.perf_counter()
    emp = mc_estimate_pair(DominatingPair.subsampled_gaussian(ratio, 1.0, p), 1_000_000, seed=0)
    analytic = subsampled_gaussian_tradeoff(MechanismSpec(ratio, 1.0, p, 1))
    low, high = emp.lower_violation(analytic), emp.upper_violation(analytic)
    elapsed = time.perf_counter() - t0
    ok = emp.consistent_with(analytic) and elapsed < 60.0
    verdict(3, ok, f"(p={p}, ratio={ratio}) band violations {low:.2e}/{high:.2e}, {elapsed:.1f} s")
    assert emp.consistent_with(analytic)
    assert elapsed < 60.0


def test_criterion_4_no_amplification(verdict):
    t0 = time.perf_counter()
    table = nonamplification_demo(math.log(2.0), [0.1, 0.5, 1.0], dims=2)
    tight = [r.tight_epsilon for r in table.rows]
    gauss = [r.gaussian_epsilon for r in table.rows]
    spread = max(tight) - min(tight)
    decreasing = gauss[0] < gauss[1] < gauss[2]
    elapsed = time.perf_counter() - t0
    ok = spread <= 1e-9 and decreasing and elapsed < 5.0
    verdict(4, ok, f"tight eps {tight[0]:.6f} (spread {spread:.1e}), gaussian {[round(g, 4) for g in gauss]}, "
                   f"{elapsed:.2f} s")
    assert spread <= 1e-9 and decreasing
    assert elapsed < 5.0


def _unit_ball(rng, n, d):
    x = rng.standard_normal((n, d))
    return x * (rng.random(n) ** (1.0 / d) / np.linalg.norm(x, axis=1))[:, None]


def test_criterion_5_logistic_split(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    d, k = 6, 4
    split = logistic_split(d, k)

    # sum identity: 100 weight draws x 1000 records
    worst_identity = 0.0
    for _ in range(100):
        w = 3.0 * rng.standard_normal((d, k))
        b = Batch(_unit_ball(rng, 1000, d), rng.integers(0, k, 1000))
        full = split.full_grad(w, b).reshape(1000, -1)
        parts = (split.priv_grad(w, b) + split.pub_grad(w, public_view(b, split.schema))).reshape(1000, -1)
        rel = np.linalg.norm(full - parts, axis=1) / np.maximum(np.linalg.norm(full, axis=1), 1e-300)
        worst_identity = max(worst_identity, float(rel.max()))

    # finite differences of the two losses, written out independently
    def pub_loss(w, x):
        return special.logsumexp(x @ w)

    def priv_loss(w, x, y):
        return -(x @ w)[y]

    h = 1e-6
    worst_fd = 0.0
    for _ in range(1000):
        w = rng.standard_normal((d, k))
        x, y = _unit_ball(rng, 1, d), int(rng.integers(0, k))
        b = Batch(x, np.array([y]))
        analytic = {"pub": split.pub_grad(w, public_view(b, split.schema))[0],
                    "priv": split.priv_grad(w, b)[0]}
        numeric = {"pub": np.zeros((d, k)), "priv": np.zeros((d, k))}
        for idx in np.ndindex(d, k):
            e = np.zeros((d, k))
            e[idx] = h
            numeric["pub"][idx] = (pub_loss(w + e, x[0]) - pub_loss(w - e, x[0])) / (2 * h)
            numeric["priv"][idx] = (priv_loss(w + e, x[0], y) - priv_loss(w - e, x[0], y)) / (2 * h)
        for part in ("pub", "priv"):
            err = np.linalg.norm(analytic[part] - numeric[part]) / max(np.linalg.norm(analytic[part]), 1e-300)
            worst_fd = max(worst_fd, float(err))

    # Lipschitz maxima, including large weights and records on the unit sphere
    max_priv = max_full = 0.0
    for scale in (0.1, 1.0, 10.0, 100.0):
        w = scale * rng.standard_normal((d, k))
        x = rng.standard_normal((20_000, d))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        b = Batch(x, rng.integers(0, k, 20_000))
        max_priv = max(max_priv, float(np.linalg.norm(split.priv_grad(w, b).reshape(20_000, -1), axis=1).max()))
        max_full = max(max_full, float(np.linalg.norm(split.full_grad(w, b).reshape(20_000, -1), axis=1).max()))

    elapsed = time.perf_counter() - t0
    checks = (worst_identity <= 1e-10, worst_fd <= 1e-5, max_priv <= 1.0 + 1e-12,
              max_full <= math.sqrt(2.0) + 1e-12, elapsed < 30.0)
    verdict(5, all(checks), f"identity {worst_identity:.1e}, finite diff {worst_fd:.1e}, "
                            f"max private {max_priv:.6f}, max full {max_full:.6f}, {elapsed:.1f} s")
    assert worst_identity <= 1e-10
    assert worst_fd <= 1e-5
    assert max_priv <= 1.0 + 1e-12 and max_full <= math.sqrt(2.0) + 1e-12
    assert elapsed < 30.0


@pytest.mark.slow
def test_criterion_6_convergence_bounds(verdict):
    t0 = time.perf_counter()
    strength, dims, sigma, steps, radius, weight_radius = 0.5, 10, 0.1, 10_000, 1.0, 2.0
    ds = strongly_convex_quadratic(100, dims, seed=1, strength=strength, radius=radius)
    batch = ds.batch()
    split = quadratic_split(dims, strength, ds.ground_truth["private_columns"], data_radius=radius,
                            weight_radius=weight_radius)
    minimizer = np.array(ds.ground_truth["minimizer"])
    risk = lambda w: float(np.mean(split.loss(w, batch)))
    lipschitz = split.full_lipschitz
    base = dict(priv_batch_expected=10, pub_batch=100, steps=steps, sigma=sigma, projection_radius=weight_radius)

    def excess(**kw):
        runs = [risk(train_fdp_sgd(batch, split, TrainConfig(**base, **kw, seed=s)).final_weights) - risk(minimizer)
                for s in range(20)]
        return float(np.mean(runs))

    strong = excess(lr_schedule="inverse-t", strong_convexity=strength)
    strong_bound = 17 * (lipschitz**2 + dims * sigma**2) * (1 + math.log(steps)) / (strength * steps)
    c = weight_radius / math.sqrt(lipschitz**2 + dims * sigma**2)
    convex = excess(lr_schedule="inverse-sqrt", lr=c)
    convex_bound = ((weight_radius**2 / c + c * lipschitz**2 + c * dims * sigma**2)
                    * (2 + math.log(steps)) / math.sqrt(steps))
    elapsed = time.perf_counter() - t0
    ok = strong <= strong_bound and convex <= convex_bound and elapsed < 300
    verdict(6, ok, f"strongly convex {strong:.2e} <= {strong_bound:.2e}, convex {convex:.2e} <= {convex_bound:.2e}, "
                   f"{elapsed:.0f} s")
    assert strong <= strong_bound
    assert convex <= convex_bound
    assert elapsed < 300


@pytest.mark.slow
def test_criterion_7_directional_gain(verdict):
    t0 = time.perf_counter()
    n = 10_000
    ds = purchase_like(n, 600, seed=0, public_dims=100)
    spec = SweepSpec(
        epsilon_grid=(4.0, 8.0), methods=("fdp-sgd", "dpsgd"), delta=1.0 / (2 * n), repeats=5,
        base_config=dict(priv_batch_expected=500, pub_batch=500, steps=300, lr=0.1),
        grids={"fdp-sgd": {"clip": [1.0], "lr": [0.1, 0.3], "mix_ratio": [1.0, 3.0]},
               "dpsgd": {"clip": [1.0], "lr": [0.1, 0.3, 0.5]}},
    )
    rows = {(r["epsilon_target"], r["method"]): r for r in run_sweep(ds, spec).rows}
    details, ok = [], True
    for eps in spec.epsilon_grid:
        fdp, dp = rows[(eps, "fdp-sgd")], rows[(eps, "dpsgd")]
        margin = fdp["utility_mean"] - dp["utility_mean"]
        pooled = math.sqrt((fdp["utility_std"] ** 2 + dp["utility_std"] ** 2) / 2)
        ok &= margin > pooled and max(fdp["accounted_epsilon"], dp["accounted_epsilon"]) <= eps + 1e-9
        details.append(f"eps={eps:g}: {fdp['utility_mean']:.4f} vs {dp['utility_mean']:.4f} "
                       f"(margin {margin:.4f}, pooled std {pooled:.4f})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    verdict(7, ok, "; ".join(details) + f", {elapsed:.0f} s")
    assert ok


def test_criterion_8_attribute_bound(verdict):
    t0 = time.perf_counter()
    honest = attribute_suite()
    understated = attribute_suite(understate=2.0)
    failures_honest = [name for name, r in honest if not r.passed]
    failures_power = sum(not r.passed for _, r in understated)
    elapsed = time.perf_counter() - t0
    ok = not failures_honest and failures_power >= 1 and elapsed < 120
    verdict(8, ok, f"{len(honest) - len(failures_honest)}/{len(honest)} instances pass, "
                   f"power check fails {failures_power}/{len(understated)}, {elapsed:.1f} s")
    assert not failures_honest
    assert failures_power >= 1
    assert elapsed < 120


def test_criterion_9_distinguishing_game(verdict):
    t0 = time.perf_counter()
    report = fdp_sgd_game(ScalarProblem(), [0.3], 1.0, n_samples=1_000_000, seed=0)
    elapsed = time.perf_counter() - t0
    ok = report.passed and elapsed < 300
    verdict(9, ok, f"worst excess of reference over band {report.lower_violation:.2e}, {elapsed:.1f} s")
    assert report.passed
    assert elapsed < 300


def test_criterion_10_calibration_round_trip(verdict):
    t0 = time.perf_counter()
    delta, steps = 1e-5, 1000
    worst = 0.0
    for eps in (0.5, 2.0, 8.0):
        for p in (0.001, 0.01, 0.1):
            sigma = float(calibrate_sigma(PrivacyParams(eps, delta), p, steps))
            achieved = to_epsilon(accounted_curve(MechanismSpec(1.0, sigma, p, steps)), delta)
            worst = max(worst, abs(achieved - eps))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed < 120
    verdict(10, ok, f"max |d eps| = {worst:.2e}, {elapsed:.1f} s")
    assert worst <= 1e-3
    assert elapsed < 120
