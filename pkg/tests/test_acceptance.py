"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``CRITERION k: PASS|FAIL ...`` line; the lines are
repeated in the pytest terminal summary.
"""

import math
import time

import numpy as np
import pytest

from epicost.cli import run_sweep
from epicost.cost import (asymptotic_cost, er_exact_cost, linear_cost, solve_fixed_point_F,
                          spectral_bound, system_lambda_max)
from epicost.degree_dist import (Exponential, Pareto, PointMass, ScaledDistribution, Truncated,
                                 sample_weights)
from epicost.epidemic import EpidemicParams, iterate_linear, iterate_nonlinear, monte_carlo_cost
from epicost.graph import generate, spectral_radius
from epicost.immunize import er_optimal_pi, er_social_cost
from epicost.rmt import assumption1_gaps, build_wigner_C, draw_sample, lemma1_terms, wigner_stats
from epicost.seeding import child_seed

MASTER_SEED = 7
ER_PARAMS = EpidemicParams(delta=0.6, beta=0.03, alpha=0.2, cost=1.0)


def er_graph(n, mean_degree, seed):
    w = sample_weights(PointMass(mean_degree), n, child_seed(seed, 0))
    return generate(w, child_seed(seed, 1))


def rel(a, b):
    """Symmetric relative difference, measured against the smaller value."""
    return abs(a - b) / min(abs(a), abs(b))


@pytest.fixture(scope="module")
def er_three_way():
    start = time.perf_counter()
    g = er_graph(2000, 10.0, MASTER_SEED)
    lam = system_lambda_max(g, ER_PARAMS)
    lin = linear_cost(g, ER_PARAMS, lambda_max=lam).value
    bound = spectral_bound(g, ER_PARAMS, lambda_max=lam).value
    exact = er_exact_cost(ER_PARAMS.beta * 10.0, 0.6, 0.2, 1.0)
    mc = monte_carlo_cost(g, ER_PARAMS, 100, child_seed(MASTER_SEED, 2))
    return {"linear": lin, "bound": bound, "er": exact, "mc": mc.mean, "mc_stderr": mc.stderr,
            "seconds": time.perf_counter() - start}


def test_criterion_1_er_three_way_agreement(er_three_way, report_criterion):
    r = er_three_way
    pairs = {"linear/er": rel(r["linear"], r["er"]), "linear/mc": rel(r["linear"], r["mc"]),
             "er/mc": rel(r["er"], r["mc"])}
    ok = max(pairs.values()) < 0.10 and r["seconds"] < 60 and abs(r["er"] - 0.6667) < 5e-5
    detail = (f"linear={r['linear']:.4f} er={r['er']:.4f} mc={r['mc']:.4f}"
              f"(+-{r['mc_stderr']:.4f}) "
              + " ".join(f"{k}={v:.1%}" for k, v in pairs.items())
              + f" limit=10% runtime={r['seconds']:.1f}s")
    report_criterion(1, ok, detail)
    assert r["seconds"] < 60
    assert max(pairs.values()) < 0.10, detail


def _dominance_instance(i, rng):
    kind = ("er", "exponential", "pareto")[i % 3]
    n = int(rng.integers(200, 1500))
    if kind == "er":
        dist = PointMass(float(rng.uniform(2.0, 20.0)))
    elif kind == "exponential":
        dist = Truncated(Exponential(1 / float(rng.uniform(2.0, 10.0))), upper=60.0)
    else:
        dist = Truncated(Pareto(2.5, float(rng.uniform(1.0, 5.0))), upper=80.0)
    g = generate(sample_weights(dist, n, child_seed(MASTER_SEED, 100, i, 0)),
                 child_seed(MASTER_SEED, 100, i, 1))
    delta = float(rng.uniform(0.1, 1.0))
    lam_a = spectral_radius(g)
    beta = float(rng.uniform(0.05, 0.98)) * delta / max(lam_a, 1e-9)
    return kind, g, EpidemicParams(delta, min(beta, 0.99), float(rng.uniform(0.05, 0.5)))


def test_criterion_2_bound_dominance(report_criterion):
    rng = np.random.default_rng(child_seed(MASTER_SEED, 100))
    worst, failures = math.inf, []
    for i in range(100):
        kind, g, params = _dominance_instance(i, rng)
        lam = system_lambda_max(g, params)
        lin = linear_cost(g, params, lambda_max=lam).value
        bound = spectral_bound(g, params, lambda_max=lam).value
        margin = (bound - lin) / lin
        worst = min(worst, margin)
        if margin < -1e-9:
            failures.append((i, kind, margin))
    ok = not failures
    report_criterion(2, ok, f"100 graphs (ER/exp/Pareto 2.5), min (bound-linear)/linear="
                            f"{worst:.3e}, violations={len(failures)} tolerance=1e-9")
    assert ok, failures


def test_criterion_3_er_bound_tightness(report_criterion):
    gaps = []
    for s in range(5):
        g = er_graph(2000, 10.0, child_seed(MASTER_SEED, 300, s) if s else MASTER_SEED)
        lam = system_lambda_max(g, ER_PARAMS)
        lin = linear_cost(g, ER_PARAMS, lambda_max=lam).value
        gaps.append((spectral_bound(g, ER_PARAMS, lambda_max=lam).value - lin) / lin)
    ok = max(gaps) < 0.05
    report_criterion(3, ok, f"(bound-linear)/linear over 5 ER draws: max={max(gaps):.2%} "
                            f"min={min(gaps):.2%} limit=5%")
    assert ok


def test_criterion_4_asymptotic_convergence(report_criterion):
    start = time.perf_counter()
    p, delta = 0.02, 0.6
    medians = []
    for n in (500, 1000, 2000, 4000):
        np_ = n * p
        params = EpidemicParams(delta, 0.3 / np_, 0.2)
        target = asymptotic_cost(ScaledDistribution(PointMass(np_), params.beta), delta, 0.2,
                                 1.0, kappa=0.0).value
        errs = [abs(linear_cost(er_graph(n, np_, child_seed(MASTER_SEED, 400, n, s)),
                                params).value - target) for s in range(20)]
        medians.append(float(np.median(errs)))
    seconds = time.perf_counter() - start
    ok = all(a > b for a, b in zip(medians, medians[1:])) and seconds < 300
    report_criterion(4, ok, "median |linear - asymptotic| n=500..4000: "
                     + ", ".join(f"{m:.2e}" for m in medians) + f" runtime={seconds:.0f}s")
    assert ok


def test_criterion_5_fixed_point(report_criterion):
    kappa = 0.25
    root = (1 - math.sqrt(1 - 4 * kappa**2)) / (2 * kappa**2)
    F = solve_fixed_point_F(ScaledDistribution(PointMass(1.0), 1.0), kappa, tol=1e-12).F
    d = ScaledDistribution(Exponential(0.3), 0.05)
    zero = solve_fixed_point_F(d, 0.0).F
    ok = abs(F - root) <= 1e-8 and abs(F - 1.07180) < 5e-6 and zero == d.moments().mean
    report_criterion(5, ok, f"F={F:.10f} root={root:.10f} |diff|={abs(F - root):.1e} "
                            f"kappa=0 exact={zero == d.moments().mean}")
    assert ok


@pytest.fixture(scope="module")
def lemma1_medians():
    n, np_ = 2000, 40.0
    beta = 0.3 / np_
    terms = np.array([lemma1_terms(draw_sample(PointMass(np_), beta, n,
                                               child_seed(MASTER_SEED, 600, s)), 0.6)
                      for s in range(20)])
    return np.median(terms, axis=0)


def test_criterion_6_lemma1_limits(lemma1_medians, report_criterion):
    target = np.array([1.6667, 0.5, 0.09])
    errs = np.abs(lemma1_medians - target) / target
    ok = bool(np.all(errs < 0.05))
    names = ("t11", "t1v", "tvv")
    report_criterion(6, ok, " ".join(f"{k}={m:.4f}(target {t}, {e:.1%})" for k, m, t, e in
                                     zip(names, lemma1_medians, target, errs)) + " limit=5%")
    assert ok


def test_lemma1_medians_track_self_consistent_limits(lemma1_medians):
    # the limits implied by the resolvent identity are (1, vbar, E v^2) / delta
    expected = np.array([1.0, 0.3, 0.09]) / 0.6
    assert np.all(np.abs(lemma1_medians - expected) / expected < 0.05)


def test_criterion_7_assumption1_gap_decay(report_criterion):
    p, delta = 0.02, 0.6
    med = []
    for n in (500, 1000, 2000):
        np_ = n * p
        gaps = assumption1_gaps(PointMass(np_), 0.3 / np_, delta, n, samples=20,
                                seed=child_seed(MASTER_SEED, 700, n))
        med.append(np.median(gaps, axis=0))
    med = np.array(med)
    decreasing = [bool(np.all(np.diff(med[:, k]) < 0)) for k in range(3)]
    ok = all(decreasing)
    report_criterion(7, ok, " ".join(
        f"k={k + 1}:" + ",".join(f"{v:.2e}" for v in med[:, k]) for k in range(3))
        + " (n=500,1000,2000)")
    assert ok


def test_criterion_8_error_heatmap(report_criterion):
    start = time.perf_counter()
    cfg = {"axis": ["beta=0.005:0.06:0.005", "p=0.005:0.05:0.005"], "n": 1000, "delta": 0.6,
           "alpha": 0.2, "cd": 1.0, "beta": None, "dist": None, "seed": MASTER_SEED,
           "tol": 1e-10, "tail_mass": 1e-6, "runs": 100, "max_steps": 100_000}
    _, rows = run_sweep(cfg)
    seconds = time.perf_counter() - start
    inside = [r for r in rows if r["beta"] * 1000 * r["p"] < 0.8 * 0.6 - 1e-12]
    good = [r for r in inside if r["status"] == "ok" and r["rel_error"] < 0.10]
    frac = len(good) / len(inside)
    unstable = sum(r["status"] == "unstable" for r in rows)
    ok = frac >= 0.70 and seconds < 1800
    report_criterion(8, ok, f"{len(good)}/{len(inside)} cells with beta n p < 0.48 have "
                            f"rel. error < 10% ({frac:.1%}, need 70%); {unstable} unstable "
                            f"cells labelled; runtime={seconds:.0f}s")
    assert ok


def test_criterion_9_immunization_optimum(report_criterion):
    n, p = 100_000, 1.27e-4
    params = EpidemicParams(delta=0.39, beta=0.02, alpha=0.20)
    got = {c: er_optimal_pi(n, p, params, c) for c in (0.13, 1.00, 18.46)}
    pis = np.arange(0.0, 1.0 + 5e-5, 1e-4)
    grid = pis[int(np.argmin([er_social_cost(float(x), n, p, params, 1.0) for x in pis]))]
    interior = got[1.00][0]
    ok = (got[0.13] == (1.0, "full") and got[18.46] == (0.0, "none")
          and got[1.00][1] == "interior" and abs(interior - 0.564) < 5e-4
          and abs(interior - grid) < 1e-3)
    report_criterion(9, ok, f"pi_opt: c=0.13->{got[0.13][0]:g} c=1.00->{interior:.4f} "
                            f"c=18.46->{got[18.46][0]:g}; grid argmin={grid:.4f}")
    assert ok


def test_criterion_10_trivial_exactness(report_criterion):
    g = er_graph(1000, 10.0, child_seed(MASTER_SEED, 1000))
    params = EpidemicParams(delta=0.35, beta=0.0, alpha=0.2, cost=1.3)
    target = 0.2 * 1.3 / 0.35
    values = {
        "linear_solve": linear_cost(g, params).value,
        "spectral_bound": spectral_bound(g, params).value,
        "er_closed_form": er_exact_cost(0.0, 0.35, 0.2, 1.3),
        # v -> 0 limit of the asymptotic formula
        "asymptotic": asymptotic_cost(ScaledDistribution(PointMass(10.0), 1e-15), 0.35, 0.2,
                                      1.3, kappa=0.0).value,
        "linear_iteration": 1.3 * iterate_linear(g, params, 4000).mean_P.sum(),
        "nonlinear_iteration": 1.3 * iterate_nonlinear(g, params, 4000).mean_P.sum(),
    }
    worst = max(abs(v - target) for v in values.values())
    rng = np.random.default_rng(child_seed(MASTER_SEED, 1001))
    violations = 0
    for i in range(50):
        kind, g_i, p_i = _dominance_instance(i, rng)
        lin = iterate_linear(g_i, p_i, 80).P
        non = iterate_nonlinear(g_i, p_i, 80).P
        violations += int(np.any(non > lin + 1e-12))
    ok = worst <= 1e-12 and violations == 0
    report_criterion(10, ok, f"beta=0 max |cost - alpha c/delta| = {worst:.1e} over "
                             f"{len(values)} methods; linear>=nonlinear violations "
                             f"{violations}/50")
    assert ok


def test_criterion_11_wigner_statistics(report_criterion):
    s = draw_sample(PointMass(40.0), 0.3 / 40.0, 2000, child_seed(MASTER_SEED, 1100))
    st = wigner_stats(build_wigner_C(s))
    scaled_var = st["offdiag_var"] * st["n"]
    ok = 0.8 <= scaled_var <= 1.2 and st["eig_min"] >= -2.2 and st["eig_max"] <= 2.2
    report_criterion(11, ok, f"n*var={scaled_var:.4f} spectrum=[{st['eig_min']:.4f}, "
                             f"{st['eig_max']:.4f}]")
    assert ok
