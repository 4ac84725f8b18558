"""Verification suites: every check reports a numeric margin (>= 0 passes).

Each suite sweeps a set of test matrices and turns the band-error lemmas,
the one-step bounds, the SGD identities and the propagation eigenpairs
into machine-checkable inequalities.
"""

from dataclasses import dataclass

import numpy as np

from rkm import analysis
from rkm import rng as rng_mod
from rkm.errors import ConfigError
from rkm.linalg import FrequencySplit, spectral_constants
from rkm.problems import LinearSystem, make_circle, make_problem
from rkm.solvers import kaczmarz_update, sgd_step

SUITES = ("lemmas", "theorem33", "theorem35", "props", "propagation", "all")
SLACK = 1e-10
MATRICES = ("identity", "diag", "circle", "phillips", "gravity", "shaw")
VERIFY_SEED = 20170621


@dataclass(frozen=True)
class Check:
    name: str
    margin: float
    tol: float = 0.0

    @property
    def passed(self):
        return bool(self.margin >= -self.tol)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<60s} margin={self.margin:+.3e} {status}"


def fixture_system(name, n=None):
    """Named fixture system; ``x_true`` is a fixed smooth-ish vector."""
    if name == "identity":
        n = n or 50
        A = np.eye(n)
    elif name == "diag":
        A = np.diag([3.0, 2.0, 1.0])
    elif name == "circle":
        return make_circle(n or 100)
    elif name in ("phillips", "gravity", "shaw"):
        return make_problem(name, n or 200)
    else:
        raise ConfigError(f"unknown test matrix {name!r}; expected one of {MATRICES}", field="problem")
    x = np.linspace(1.0, 2.0, A.shape[1])
    return LinearSystem(A, A @ x, x, name if name != "identity" else f"identity{A.shape[0]}")


def levels_for(m):
    return sorted({L for L in (1, 5, 10, m) if L <= m})


def _random_errors(system, rng, count):
    """Half isotropic Gaussian vectors, half with spectrally decaying coefficients.

    The bounds are homogeneous of degree two, so unit scale loses nothing and
    keeps rounding far below the fixed absolute slack.
    """
    m = system.m
    V = system.basis.V
    out = []
    for j in range(count):
        z = rng.standard_normal(m)
        if j % 2:
            decay = 1.0 / (1.0 + np.arange(m)) ** rng.uniform(0.5, 3.0)
            z = V @ (z * decay)
        out.append(z)
    return out


def lemma_checks(system, samples=100, rng=None):
    rng = rng or np.random.default_rng(VERIFY_SEED)
    A = system.A
    basis = system.basis
    m = system.m
    V = basis.V
    checks = []
    frob_sq = system.frob_sq
    sig_sq = float(np.sum(basis.s**2))
    checks.append(Check(f"{system.name}: ||A||_F^2 = sum sigma_i^2", 1e-10 - abs(frob_sq - sig_sq) / frob_sq))
    gram = A.T @ A
    outer = np.einsum("ij,ik->jk", A, A)
    checks.append(
        Check(f"{system.name}: sum a_i a_i^t = A^t A", 1e-10 * (1 + np.abs(gram).max()) - np.abs(gram - outer).max())
    )
    for L in levels_for(m):
        sL, sL1 = basis.sigma(L), basis.sigma(L + 1)
        worst = {"lower": np.inf, "upper": np.inf, "high": np.inf, "cross": np.inf}
        for _ in range(samples):
            eL = V[:, :L] @ rng.standard_normal(L)
            eH = V[:, L:] @ rng.standard_normal(m - L) if L < m else np.zeros(m)
            AeL, AeH = A @ eL, A @ eH
            nL, nH = np.linalg.norm(eL), np.linalg.norm(eH)
            worst["lower"] = min(worst["lower"], np.linalg.norm(AeL) - sL * nL + SLACK)
            worst["upper"] = min(worst["upper"], basis.sigma(1) * nL - np.linalg.norm(AeL) + SLACK)
            worst["high"] = min(worst["high"], sL1 * nH - np.linalg.norm(AeH) + SLACK)
            scale = 1.0 + np.linalg.norm(AeL) * np.linalg.norm(AeH)
            worst["cross"] = min(worst["cross"], SLACK * scale - abs(AeL @ AeH))
        for key, label in (
            ("lower", "sigma_L|e_L| <= |A e_L|"),
            ("upper", "|A e_L| <= sigma_1|e_L|"),
            ("high", "|A e_H| <= sigma_{L+1}|e_H|"),
            ("cross", "<A e_L, A e_H> = 0"),
        ):
            checks.append(Check(f"{system.name} L={L}: {label}", worst[key]))
        split = FrequencySplit(basis, L)
        _, PH = split.project(A)
        ph_sq = np.einsum("ij,ij->i", PH, PH)
        checks.append(Check(f"{system.name} L={L}: max_i |P_H a_i|^2 <= sigma_(L+1)^2", sL1**2 + SLACK - ph_sq.max()))
        tail = float(np.sum(basis.s[L:] ** 2))
        checks.append(Check(f"{system.name} L={L}: sum_i |P_H a_i|^2 <= tail", tail + SLACK - ph_sq.sum()))
    return checks


def theorem33_checks(system, samples=100, rng=None):
    rng = rng or np.random.default_rng(VERIFY_SEED + 1)
    basis = system.basis
    errors = _random_errors(system, rng, samples)
    checks = []
    for L in levels_for(system.m):
        c = analysis.bound_constants(basis, system.frob, L)
        split = FrequencySplit(basis, L)
        worst_L = worst_H = np.inf
        for e in errors:
            EL, EH = analysis.conditional_band_expectation(system, split, e)
            eL, eH = split.band_energies(e)
            BL, BH = analysis.theorem_3_3_bounds(c, eL, eH)
            worst_L, worst_H = min(worst_L, BL - EL), min(worst_H, BH - EH)
        checks.append(Check(f"{system.name} L={L}: E|P_L e+|^2 <= exact-data bound", worst_L, SLACK))
        checks.append(Check(f"{system.name} L={L}: E|P_H e+|^2 <= exact-data bound", worst_H, SLACK))
    consts = spectral_constants(basis, system.frob)
    if consts.numeric_rank == system.m:
        c = analysis.bound_constants(basis, system.frob, system.m)
        gap = abs((1.0 - c.c1) - (1.0 - consts.kappa**-2))
        checks.append(Check(f"{system.name} L=m: 1-c1 = 1-kappa^-2", 1e-12 - gap))
    return checks


def theorem35_checks(system, samples=100, noises=20, rng=None):
    rng = rng or np.random.default_rng(VERIFY_SEED + 2)
    basis = system.basis
    errors = _random_errors(system, rng, samples)
    etas = [rng.standard_normal(system.n) * 10.0 ** rng.uniform(-4, 1) for _ in range(noises)]
    checks = []
    for L in levels_for(system.m):
        c = analysis.bound_constants(basis, system.frob, L)
        split = FrequencySplit(basis, L)
        worst_L = worst_H = worst_sum = worst_anti = np.inf
        for e in errors:
            eL, eH = split.band_energies(e)
            for eta in etas:
                delta = float(np.linalg.norm(eta))
                EL, EH = analysis.conditional_band_expectation(system, split, e, eta)
                BL, BH = analysis.theorem_3_5_bounds(c, eL, eH, delta, system.frob)
                worst_L, worst_H = min(worst_L, BL - EL), min(worst_H, BH - EH)
                total = analysis.conditional_total_expectation(system, e, eta)
                worst_sum = min(worst_sum, 1e-10 * (1 + abs(total)) - abs(EL + EH - total))
        for eta in etas[:3]:
            for e in errors[:10]:
                lo, hi = analysis.noise_cross_terms(system, split, e, eta)
                scale = 1.0 + abs(lo) + abs(hi)
                worst_anti = min(worst_anti, 1e-10 * scale - abs(lo + hi))
        checks.append(Check(f"{system.name} L={L}: E|P_L e+|^2 <= noisy bound", worst_L, SLACK))
        checks.append(Check(f"{system.name} L={L}: E|P_H e+|^2 <= noisy bound", worst_H, SLACK))
        checks.append(Check(f"{system.name} L={L}: E_L + E_H = full-error expectation", worst_sum))
        checks.append(Check(f"{system.name} L={L}: low/high noise cross terms cancel", worst_anti))
    return checks


def props_checks(system, samples=100, rng=None):
    rng = rng or np.random.default_rng(VERIFY_SEED + 3)
    A, b = system.A, system.b
    n, m = system.n, system.m
    w = system.row_norms_sq
    checks = []
    worst = np.inf
    for _ in range(samples):
        x = rng.standard_normal(m) * 10.0 ** rng.uniform(-2, 2)
        i = int(rng.integers(n))
        kacz = kaczmarz_update(A, w, b, x, i)
        sgd = sgd_step(system, x, b, i)
        worst = min(worst, 1e-12 * np.linalg.norm(kacz) - np.linalg.norm(kacz - sgd))
    checks.append(Check(f"{system.name}: Kaczmarz step = weighted SGD step", worst))

    worst_mean = worst_cov = worst_psd = worst_unb = np.inf
    for _ in range(10):
        x = rng.standard_normal(m)
        mean, cov = analysis.sgd_statistics(system, x)
        mean_d, cov_d = analysis.sgd_statistics_direct(system, x)
        scale_m = 1 + np.abs(mean).max()
        scale_c = 1 + np.abs(cov).max()
        worst_mean = min(worst_mean, 1e-10 * scale_m - np.abs(mean - mean_d).max())
        worst_cov = min(worst_cov, 1e-10 * scale_c - np.abs(cov - cov_d).max())
        worst_psd = min(worst_psd, np.linalg.eigvalsh(cov).min() + 1e-10 * scale_c)
        # variance-reduced gradient is unbiased when g_snap = g(x_snap)
        x_snap = rng.standard_normal(m)
        p = system.p
        G = (system.frob_sq / (n * w) * (A @ x - b))[:, None] * A
        Gs = (system.frob_sq / (n * w) * (A @ x_snap - b))[:, None] * A
        g_snap = A.T @ (A @ x_snap - b) / n
        vr = p @ (G - Gs + g_snap)
        full = A.T @ (A @ x - b) / n
        worst_unb = min(worst_unb, 1e-10 * (1 + np.abs(full).max()) - np.abs(vr - full).max())
    checks.append(Check(f"{system.name}: E[g_i(x)] = A^t(Ax-b)/n", worst_mean))
    checks.append(Check(f"{system.name}: covariance formula = weighted sum", worst_cov))
    checks.append(Check(f"{system.name}: covariance PSD", worst_psd))
    checks.append(Check(f"{system.name}: variance-reduced gradient unbiased", worst_unb))
    if system.x_true is not None:
        mean, cov = analysis.sgd_statistics(system, system.x_true)
        checks.append(
            Check(f"{system.name}: statistics vanish at x*", 1e-10 - max(np.abs(mean).max(), np.abs(cov).max()))
        )
    return checks


def propagation_checks():
    checks = []
    worst_val = worst_vec = np.inf
    c1_grid = (1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 0.5, 0.7, 0.9)
    for c1 in c1_grid:
        for frac in (0.0, 1e-6, 1e-4, 1e-2, 0.1, 0.3, 0.5, 1.0):
            c2 = frac * c1
            pm = analysis.build_propagation(c1, c2)
            vals, vecs = np.linalg.eigh(pm.D)
            worst_val = min(
                worst_val,
                1e-12 - max(abs(vals[1] - pm.lambda_plus), abs(vals[0] - pm.lambda_minus)),
            )
            if c2 > 0:
                # eigenvectors are determined up to sign
                dp = min(np.linalg.norm(vecs[:, 1] - pm.v_plus), np.linalg.norm(vecs[:, 1] + pm.v_plus))
                dm = min(np.linalg.norm(vecs[:, 0] - pm.v_minus), np.linalg.norm(vecs[:, 0] + pm.v_minus))
                worst_vec = min(worst_vec, 1e-12 - max(dp, dm))
    checks.append(Check("closed-form eigenvalues = eigh", worst_val))
    checks.append(Check("closed-form eigenvectors = eigh (up to sign)", worst_vec))

    worst_p = worst_m = np.inf
    for c1 in c1_grid:
        for alpha in (1e-6, 1e-5, 1e-4, 1e-3):
            pm = analysis.build_propagation(c1, alpha * c1)
            dev_p, dev_m = pm.approx_deviation
            bound = 10.0 * c1 * alpha**2
            worst_p = min(worst_p, bound - dev_p + 1e-15)
            worst_m = min(worst_m, bound - dev_m + 1e-15)
    checks.append(Check("|lambda+ - (1 + c1 alpha)| <= 10 c1 alpha^2", worst_p))
    checks.append(Check("|lambda- - (1 - c1)| <= 10 c1 alpha^2", worst_m))

    c = analysis.BoundConstants(c1=0.5, c2=0.1, level=1)
    worst_pow = np.inf
    for k in (0, 1, 2, 5, 50, 200):
        _, via_eig = analysis.propagation(c, k, 0.7, 0.3)
        direct = np.linalg.matrix_power(analysis.propagation_matrix_of(0.5, 0.1), k) @ [0.7, 0.3]
        worst_pow = min(worst_pow, 1e-10 * (1 + np.abs(direct).max()) - np.abs(via_eig - direct).max())
    checks.append(Check("D^k via eigendecomposition = matrix power", worst_pow))

    # Young's inequality is tight at eps = delta / (||A||_F sqrt(c2) ||e||)
    c = analysis.BoundConstants(c1=0.4, c2=0.05, level=1)
    eL, eH, delta, frob = 2.0, 0.5, 0.3, 3.0
    eps = delta / (frob * np.sqrt(c.c2) * np.sqrt(eL + eH))
    young = analysis.noisy_propagation(c, eps, delta, frob, 1, eL, eH)
    direct = analysis.theorem_3_5_bounds(c, eL, eH, delta, frob)
    checks.append(Check("one noisy propagation step = noisy bound at optimal eps", 1e-12 - np.abs(np.subtract(young, direct)).max()))
    return checks


def sweep_systems():
    return [fixture_system(name) for name in MATRICES]


def run_suite(suite, systems=None):
    """Run a named suite and return its list of :class:`Check`."""
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; expected one of {SUITES}", field="suite")
    systems = sweep_systems() if systems is None else systems
    rng = rng_mod.make_rng(VERIFY_SEED)
    checks = []
    if suite in ("lemmas", "all"):
        for s in systems:
            checks += lemma_checks(s, rng=rng)
    if suite in ("theorem33", "all"):
        for s in systems:
            checks += theorem33_checks(s, rng=rng)
    if suite in ("theorem35", "all"):
        for s in systems:
            checks += theorem35_checks(s, rng=rng)
    if suite in ("props", "all"):
        for s in systems:
            checks += props_checks(s, rng=rng)
    if suite in ("propagation", "all"):
        checks += propagation_checks()
    return checks


def format_report(checks):
    lines = [c.line() for c in checks]
    failed = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed")
    return "\n".join(lines)
