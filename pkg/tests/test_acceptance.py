"""Acceptance criteria 1-14, one test (and one PASS/FAIL line) per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; they are also collected in the terminal summary.
"""

import time

import numpy as np
import pytest

from rkm import analysis, cli, verify
from rkm import rng as rng_mod
from rkm.experiment import ExperimentConfig, build_system, run_experiment
from rkm.linalg import FrequencySplit, spectral_constants
from rkm.problems import make_circle
from rkm.solvers import StoppingRule, km_step, make_state, run_batch

KINDS = ("phillips", "gravity", "shaw")


def _worst(checks):
    return min(c.margin for c in checks)


def _failures(checks):
    return [c.line() for c in checks if not c.passed]


# -- 1: circle system, halving of the expected squared error ---------------


@pytest.fixture(scope="module")
def circle_run():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(problem="circle", n=100, method="rkm", x0=(1.0, 2.0), iters=10, runs=1000, stride=1)
    res = run_experiment(cfg)
    return res, time.perf_counter() - t0


def test_criterion_01_exact_oracle(acceptance):
    t0 = time.perf_counter()
    s = make_circle(100)
    split = FrequencySplit(s.basis, 1)
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        e = rng.standard_normal(2) * 10 ** rng.uniform(-2, 2)
        lo, hi = analysis.conditional_band_expectation(s, split, e)
        worst = max(worst, abs(lo + hi - 0.5 * (e @ e)) / max(1.0, e @ e))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 5
    acceptance("1a", ok, f"circle exact oracle E|e+|^2 = |e|^2/2: worst rel. dev {worst:.2e} (tol 1e-12), {elapsed:.2f}s")
    assert ok


def test_criterion_01_monte_carlo_5pct(acceptance, circle_run):
    res, elapsed = circle_run
    k = res.mean.k
    ref = 5.0 * 2.0 ** -k.astype(float)
    rel = np.abs(res.mean.e_total / ref - 1)[1:]
    bad = [int(j) for j in k[1:][rel > 0.05]]
    ok = not bad and elapsed < 5
    acceptance(
        "1b",
        ok,
        f"circle MC mean (1000 runs) within 5% of 5*2^-k, k=1..10: max rel. dev {rel.max():.3f}, "
        f"outside at k={bad}, {elapsed:.2f}s",
    )
    if not ok:
        # the relative standard error of the 1000-run mean is sqrt((1.5^k - 1)/1000),
        # 24% at k = 10, so a 5% band is unattainable in general (see the ledger)
        pytest.xfail("5% band is below one standard error for k >= 3")


def test_criterion_01_monte_carlo_3se(acceptance, circle_run):
    res, _ = circle_run
    k = res.mean.k.astype(float)[1:]
    ref = 5.0 * 2.0**-k
    # |e_k|^2 = 5 * prod sin^2(phi_j); E sin^2 = 1/2, E sin^4 = 3/8
    se = np.sqrt(25.0 * ((3 / 8) ** k - (1 / 4) ** k) / 1000)
    z = np.abs(res.mean.e_total[1:] - ref) / se
    ok = bool(np.all(z <= 3))
    acceptance("1c", ok, f"circle MC mean within 3 exact standard errors of 5*2^-k: max |z| = {z.max():.2f}")
    assert ok


# -- 2: cyclic Kaczmarz on circle(8) -----------------------------------------


def test_criterion_02_cyclic_circle(acceptance):
    t0 = time.perf_counter()
    s = make_circle(8)
    st = km_step(make_state(s, [1.0, 2.0]), s, s.b)
    e1 = np.linalg.norm(st.x)
    worst = 0.0
    for k in range(1, 21):
        st = km_step(st, s, s.b)
        worst = max(worst, abs(np.linalg.norm(st.x) - np.cos(np.pi / 4) ** k * e1))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 1
    acceptance(2, ok, f"KM circle(8) |e_k+1| = cos(pi/4)^k |e_1|, k<=20: worst abs. dev {worst:.2e}, {elapsed:.3f}s")
    assert ok


# -- 3-7: oracle sweeps ------------------------------------------------------


@pytest.fixture(scope="module")
def sweep():
    return verify.sweep_systems()


def test_criterion_03_exact_dominance(acceptance, sweep):
    t0 = time.perf_counter()
    rng = rng_mod.make_rng(verify.VERIFY_SEED)
    checks = [c for s in sweep for c in verify.theorem33_checks(s, samples=100, rng=rng)]
    bound_checks = [c for c in checks if "bound" in c.name]
    elapsed = time.perf_counter() - t0
    ok = not _failures(checks) and elapsed < 60
    acceptance(
        3,
        ok,
        f"exact-data band bounds: {len(bound_checks)} (matrix, L, band) cases x 100 errors, "
        f"min slack {_worst(bound_checks):+.2e} (>= -1e-10), {elapsed:.1f}s",
    )
    assert ok, _failures(checks)


def test_criterion_04_noisy_dominance(acceptance, sweep):
    t0 = time.perf_counter()
    rng = rng_mod.make_rng(verify.VERIFY_SEED)
    checks = [c for s in sweep for c in verify.theorem35_checks(s, samples=100, noises=20, rng=rng)]
    bound_checks = [c for c in checks if "bound" in c.name]
    elapsed = time.perf_counter() - t0
    ok = not _failures(checks) and elapsed < 120
    acceptance(
        4,
        ok,
        f"noisy band bounds: {len(bound_checks)} cases x 100 errors x 20 eta, "
        f"min slack {_worst(bound_checks):+.2e}; cross terms cancel; {elapsed:.1f}s",
    )
    assert ok, _failures(checks)


def test_criterion_05_lemmas(acceptance, sweep):
    rng = rng_mod.make_rng(verify.VERIFY_SEED)
    checks = [c for s in sweep for c in verify.lemma_checks(s, samples=100, rng=rng)]
    ok = not _failures(checks)
    acceptance(5, ok, f"band and row inequalities: {len(checks)} checks, min margin {_worst(checks):+.2e}")
    assert ok, _failures(checks)


@pytest.fixture(scope="module")
def props(sweep):
    rng = rng_mod.make_rng(verify.VERIFY_SEED)
    return [c for s in sweep for c in verify.props_checks(s, samples=100, rng=rng)]


def test_criterion_06_kaczmarz_is_sgd(acceptance, props):
    checks = [c for c in props if "SGD step" in c.name]
    ok = len(checks) == 6 and not _failures(checks)
    acceptance(6, ok, f"Kaczmarz step = weighted SGD step (1e-12 rel.), 6 matrices x 100 pairs, min margin {_worst(checks):+.2e}")
    assert ok, _failures(checks)


def test_criterion_07_gradient_statistics(acceptance, props):
    checks = [c for c in props if "SGD step" not in c.name]
    names = {c.name.split(": ", 1)[1] for c in checks}
    expected = {"E[g_i(x)] = A^t(Ax-b)/n", "covariance formula = weighted sum", "covariance PSD", "statistics vanish at x*"}
    ok = expected <= names and not _failures(checks)
    acceptance(7, ok, f"gradient mean/covariance identities, PSD, vanishing at x*: {len(checks)} checks, min margin {_worst(checks):+.2e}")
    assert ok, _failures(checks)


# -- 8: exponential envelope --------------------------------------------------


def test_criterion_08_envelope(acceptance):
    t0 = time.perf_counter()
    # identity(50): the envelope is attained exactly
    ident = verify.fixture_system("identity", 50)
    n, R = 50, 200
    rngs = [rng_mod.make_rng(0, rng_mod.RUNS, j) for j in range(R)]
    sq = []
    run_batch("rkm", ident, ident.b, np.zeros(n), 500, rngs=rngs,
              record=lambda k, X, c: sq.append(np.sum((X - ident.x_true) ** 2, axis=1)))
    sq = np.array(sq)
    k = np.arange(501, dtype=float)
    e2 = ident.x_true**2
    q, q2 = (1 - 1 / n) ** k, (1 - 2 / n) ** k
    # coordinate j survives k steps with prob. q, a pair (j, l) with prob. q2
    var = np.sum(e2**2) * (q - q**2) + (np.sum(e2) ** 2 - np.sum(e2**2)) * (q2 - q**2)
    se = np.sqrt(np.maximum(var, 0) / R)
    kappa = spectral_constants(ident.basis, ident.frob).kappa
    bound = np.array([analysis.theorem_2_1_bound(kappa, int(j), float(np.sum(e2))) for j in k])
    z_ident = np.max(np.abs(sq.mean(axis=1) - bound)[1:] / se[1:])
    ok_ident = z_ident <= 3

    # phillips(200): the envelope dominates
    cfg = ExperimentConfig(problem="phillips", n=200, method="rkm", iters=2000, runs=200, stride=1)
    res = run_experiment(cfg)
    system, _ = build_system(cfg)
    consts = spectral_constants(system.basis, system.frob)
    e_all = np.array([r.e_total for r in res.runs])
    mean = e_all.mean(axis=0)
    se_p = e_all.std(axis=0, ddof=1) / np.sqrt(200)
    e0 = float(mean[0])
    bound_p = np.array([analysis.theorem_2_1_bound(consts.kappa, int(j), e0) for j in res.mean.k])
    excess = np.max(mean - bound_p - 3 * se_p)
    ok_phil = excess <= 0
    elapsed = time.perf_counter() - t0
    ok = ok_ident and ok_phil and elapsed < 60
    acceptance(
        8,
        ok,
        f"identity(50) mean vs (1-1/n)^k|e0|^2: max |z| = {z_ident:.2f} (<= 3); "
        f"phillips(200) max(mean - bound - 3SE) = {excess:.3e} (<= 0); {elapsed:.1f}s",
    )
    assert ok


# -- 9: propagation eigenpairs -----------------------------------------------


def test_criterion_09_propagation(acceptance):
    checks = verify.propagation_checks()
    ok = not _failures(checks)
    acceptance(9, ok, f"closed-form eigenpairs vs eigh on the (c1, c2) grid, expansion remainders: min margin {_worst(checks):+.2e}")
    assert ok, _failures(checks)


# -- 10-11: preasymptotic band behaviour --------------------------------------


def _ratios_after_n(cfg):
    res = run_experiment(cfg, keep_runs=False)
    m = res.mean
    j = int(np.searchsorted(m.k, cfg.n))
    assert m.k[j] == cfg.n
    return m.e_low[j] / m.e_low[0], m.e_high[j] / m.e_high[0], m.e_total[j] / m.e_total[0]


def test_criterion_10_low_band_decays_first(acceptance):
    t0 = time.perf_counter()
    cases = []
    for kind in KINDS:
        for delta in (0.0, 1e-2):
            cfg = ExperimentConfig(problem=kind, n=200, delta=delta, method="rkm", iters=200, runs=100, level=5, stride=1)
            rL, rH, _ = _ratios_after_n(cfg)
            cases.append((kind, delta, rL, rH))
    elapsed = time.perf_counter() - t0
    ok = all(rL < rH for _, _, rL, rH in cases) and elapsed < 60
    detail = "; ".join(f"{k} d={d:g}: {rL:.2e} < {rH:.2e}" for k, d, rL, rH in cases)
    acceptance(10, ok, f"e_L(n)/e_L(0) < e_H(n)/e_H(0): {detail}; {elapsed:.1f}s")
    assert ok


def test_criterion_11_random_solution(acceptance):
    base = dict(problem="phillips", n=200, method="rkm", iters=200, runs=100, level=5, stride=1)
    sL, sH, sT = _ratios_after_n(ExperimentConfig(**base, solution="smooth"))
    rL, rH, rT = _ratios_after_n(ExperimentConfig(**base, solution="random"))
    # ordering strength: log(e_H ratio / e_L ratio); smaller (or negative) means weaker
    gap_smooth, gap_random = np.log(sH / sL), np.log(rH / rL)
    weakened = gap_random < gap_smooth
    less_reduction = rT > sT
    ok = weakened and less_reduction
    acceptance(
        11,
        ok,
        f"ordering log-gap smooth {gap_smooth:.2f} -> random {gap_random:.2f}; "
        f"total-error ratio after n steps smooth {sT:.2e} vs random {rT:.2e}",
    )
    assert ok


# -- 12: variance reduction stabilizes the residual ---------------------------


def test_criterion_12_rkmvr_stabilizes(acceptance):
    t0 = time.perf_counter()
    base = dict(problem="phillips", n=200, delta=5e-2, iters=4000, runs=100, stride=1)
    out = {}
    for method in ("rkm", "rkmvr"):
        res = run_experiment(ExperimentConfig(**base, method=method))
        last = res.mean.k >= 4000 - 200
        per_run = np.mean([np.std(r.residual_sq[last], ddof=1) for r in res.runs])
        out[method] = (np.std(res.mean.residual_sq[last], ddof=1), per_run, res.mean.e_total[-1])
    elapsed = time.perf_counter() - t0
    (a_std, a_run, a_err), (b_std, b_run, b_err) = out["rkm"], out["rkmvr"]
    ok = b_std < a_std and b_run < a_run and b_err <= a_err
    acceptance(
        12,
        ok,
        f"final-epoch std of r_k: averaged trace rkm {a_std:.3g} vs rkmvr {b_std:.3g}, "
        f"mean per-run rkm {a_run:.3g} vs rkmvr {b_run:.3g}; final e_total rkm {a_err:.4g} vs rkmvr {b_err:.4g}; {elapsed:.1f}s",
    )
    assert ok


# -- 13: discrepancy-principle stopping cost ----------------------------------


def _stop_costs(kind, delta, method, seeds, cap):
    systems = [build_system(ExperimentConfig(problem=kind, n=200, delta=delta, seed=s)) for s in seeds]
    system = systems[0][0]
    B = np.stack([noise.b_delta for _, noise in systems])
    rules = [StoppingRule(1.1, noise.delta_abs) for _, noise in systems]
    rngs = [rng_mod.make_rng(s, rng_mod.RUNS, 0) for s in seeds] if method == "rkmvr" else None
    res = run_batch(method, system, B, np.zeros(system.m), cap, rngs=rngs, rule=rules)
    assert res.stopped.all(), f"{method} {kind} delta={delta}: cap reached"
    return res.cost


def test_criterion_13_discrepancy_trend(acceptance):
    seeds = range(10)
    deltas = (1e-3, 1e-2, 5e-2)
    ok = True
    parts = []
    for kind in KINDS:
        means = {}
        for method, cap in (("rkmvr", 200_000), ("lm", 50_000)):
            means[method] = [float(np.mean(_stop_costs(kind, d, method, seeds, cap))) for d in deltas]
            ok &= all(a >= b for a, b in zip(means[method], means[method][1:]))
        ok &= all(v < l for v, l in zip(means["rkmvr"], means["lm"]))
        parts.append(
            f"{kind}: rkmvr {'/'.join(f'{v:.0f}' for v in means['rkmvr'])} vs lm {'/'.join(f'{v:.0f}' for v in means['lm'])}"
        )
    acceptance(13, ok, "mean stop cost over 10 seeds at delta 1e-3/1e-2/5e-2: " + "; ".join(parts))
    assert ok


# -- 14: determinism -----------------------------------------------------------


@pytest.mark.parametrize("method", ["km", "rkm", "rkmvr", "lm"])
def test_criterion_14_byte_identical(acceptance, tmp_path, method):
    argv = ["run", "--problem", "gravity", "--n", "60", "--delta", "0.01", "--method", method, "--iters", "600", "--runs", "5", "--seed", "3", "--dp"]
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert cli.main([*argv, "--out", str(p)]) == 0
    ok = paths[0].read_bytes() == paths[1].read_bytes()
    acceptance(14, ok, f"repeated `run` ({method}) gives byte-identical CSV")
    assert ok
