"""Band-error bounds and the exact oracles that check them.

Expectations over the random row index are evaluated exactly, as finite
sums over all ``n`` rows weighted by ``p_i``; nothing here samples.
"""

from dataclasses import dataclass

import numpy as np

from rkm.errors import ConfigError, InputError
from rkm.linalg import FrequencySplit


@dataclass(frozen=True)
class BoundConstants:
    """``c1 = sigma_L^2 / ||A||_F^2`` and ``c2 = sum_{i>L} sigma_i^2 / ||A||_F^2``."""

    c1: float
    c2: float
    level: int

    @property
    def alpha(self):
        return self.c2 / self.c1 if self.c1 > 0 else None


def bound_constants(basis, frob, level):
    m = basis.V.shape[0]
    if not (1 <= level <= m):
        raise ConfigError(f"truncation level {level} outside [1, {m}]", field="level")
    frob_sq = float(frob) ** 2
    s = basis.s
    tail = float(np.sum(s[level:] ** 2))
    return BoundConstants(c1=basis.sigma(level) ** 2 / frob_sq, c2=tail / frob_sq, level=level)


def next_step_errors(system, e, eta=None):
    """All ``n`` possible next errors ``(I - a_i a_i^t/||a_i||^2) e + eta_i a_i/||a_i||^2``."""
    A = system.A
    w = system.row_norms_sq
    e = np.asarray(e, dtype=float)
    coef = -(A @ e) / w
    if eta is not None:
        coef = coef + np.asarray(eta, dtype=float) / w
    return e[None, :] + coef[:, None] * A


def conditional_band_expectation(system, split, e, eta=None):
    """Exact ``(E[||P_L e_next||^2 | e], E[||P_H e_next||^2 | e])`` for one RKM step."""
    E = next_step_errors(system, e, eta)
    low, high = split.band_energies(E)
    p = system.p
    return float(p @ low), float(p @ high)


def conditional_total_expectation(system, e, eta=None):
    """Closed form of ``E[||e_next||^2 | e]``.

    Each projected error is orthogonal to its row, so the noise cross terms
    vanish and ``E = ||e||^2 - ||A e||^2/||A||_F^2 + ||eta||^2/||A||_F^2``.
    """
    e = np.asarray(e, dtype=float)
    Ae = system.A @ e
    total = e @ e - (Ae @ Ae) / system.frob_sq
    if eta is not None:
        eta = np.asarray(eta, dtype=float)
        total += (eta @ eta) / system.frob_sq
    return float(total)


def noise_cross_terms(system, split, e, eta):
    """Expected noise cross terms of the low and the high band.

    These are ``sum_i p_i * 2 eta_i/||a_i||^2 * <P_B a_i, P_B((I - a_i a_i^t/||a_i||^2) e)>``
    for ``B = L, H``; they are negatives of each other.
    """
    A = system.A
    w = system.row_norms_sq
    p = system.p
    E0 = next_step_errors(system, e)
    aL, aH = split.project(A)
    eL_next, eH_next = split.project(E0)
    scale = p * 2.0 * np.asarray(eta, dtype=float) / w
    low = float(scale @ np.einsum("ij,ij->i", aL, eL_next))
    high = float(scale @ np.einsum("ij,ij->i", aH, eH_next))
    return low, high


def theorem_3_3_bounds(c, eL, eH):
    """Exact-data one-step bounds on the expected low/high band errors."""
    if eL < 0 or eH < 0:
        raise InputError("band errors must be nonnegative")
    return (1.0 - c.c1) * eL + c.c2 * eH, c.c2 * eL + (1.0 + c.c2) * eH


def theorem_3_5_bounds(c, eL, eH, delta_abs, frob):
    """Noisy-data one-step bounds; ``delta_abs >= ||eta||``."""
    if delta_abs < 0 or frob <= 0:
        raise InputError("noise level must be nonnegative and ||A||_F positive")
    bL, bH = theorem_3_3_bounds(c, eL, eH)
    extra = delta_abs**2 / frob**2 + 2.0 / frob * delta_abs * np.sqrt(c.c2) * np.sqrt(eL + eH)
    return bL + extra, bH + extra


def propagation_matrix_of(c1, c2):
    return np.array([[1.0 - c1, c2], [c2, 1.0 + c2]])


@dataclass(frozen=True, eq=False)
class PropagationMatrix:
    """Symmetric 2x2 matrix bounding the evolution of ``(E e_L, E e_H)``.

    ``v_plus`` has nonnegative entries; ``v_minus`` is ``(1, -2 c2/(S + c1 + c2))``
    normalized, with ``S = sqrt((c1 + c2)^2 + 4 c2^2)``.
    """

    D: np.ndarray
    lambda_plus: float
    lambda_minus: float
    v_plus: np.ndarray
    v_minus: np.ndarray
    approx_lambda_plus: float | None = None
    approx_lambda_minus: float | None = None

    def power_apply(self, k, vec):
        """``D^k @ vec`` through the eigendecomposition."""
        if k < 0:
            raise ValueError("power must be nonnegative")
        Q = np.column_stack([self.v_plus, self.v_minus])
        lam = np.array([self.lambda_plus, self.lambda_minus]) ** k
        return Q @ (lam * (Q.T @ np.asarray(vec, dtype=float)))

    @property
    def approx_deviation(self):
        if self.approx_lambda_plus is None:
            return None
        return (
            abs(self.lambda_plus - self.approx_lambda_plus),
            abs(self.lambda_minus - self.approx_lambda_minus),
        )


def eigen_closed_form(c1, c2):
    """Closed-form eigenpairs of ``[[1 - c1, c2], [c2, 1 + c2]]``."""
    t = c1 + c2
    S = np.hypot(t, 2.0 * c2)
    lam_p = (2.0 - c1 + c2 + S) / 2.0
    lam_m = (2.0 - c1 + c2 - S) / 2.0
    if c2 == 0.0:
        return lam_p, lam_m, np.array([0.0, 1.0]), np.array([1.0, 0.0])
    # S - t = 4 c2^2 / (S + t) avoids cancellation when c2 << c1
    v_p = np.array([2.0 * c2, S + t])
    v_m = np.array([S + t, -2.0 * c2])
    return lam_p, lam_m, v_p / np.linalg.norm(v_p), v_m / np.linalg.norm(v_m)


def build_propagation(c1, c2, approx_alpha=1e-3):
    lam_p, lam_m, v_p, v_m = eigen_closed_form(c1, c2)
    approx_p = approx_m = None
    if c1 > 0 and c2 / c1 <= approx_alpha:
        alpha = c2 / c1
        approx_p, approx_m = 1.0 + c1 * alpha, 1.0 - c1
    return PropagationMatrix(
        D=propagation_matrix_of(c1, c2),
        lambda_plus=float(lam_p),
        lambda_minus=float(lam_m),
        v_plus=v_p,
        v_minus=v_m,
        approx_lambda_plus=approx_p,
        approx_lambda_minus=approx_m,
    )


def propagation(c, k, eL0, eH0):
    """Propagation matrix for ``c`` and the bound ``D^k (eL0, eH0)``.

    For ``alpha = c2/c1 <= 1e-3`` the first-order eigenvalue approximations
    ``1 + c1 alpha`` and ``1 - c1`` are attached together with their deviation.
    """
    pm = build_propagation(c.c1, c.c2)
    return pm, pm.power_apply(k, [eL0, eH0])


def noisy_propagation(c, eps, delta_abs, frob, k, eL0, eH0):
    """Multi-step noisy bound after Young-splitting the cross term with ``eps``.

    Uses ``c1' = c1 - eps c2``, ``c2' = (1 + eps) c2`` and adds
    ``(1 + 1/eps) delta^2/||A||_F^2 * sum_{j<k} D'^j (1, 1)``, evaluated as
    ``(I - D')^{-1} (I - D'^k) (1, 1)`` when ``I - D'`` is invertible.
    """
    if eps <= 0:
        raise ConfigError("Young parameter eps must be positive", field="eps")
    c1b = c.c1 - eps * c.c2
    c2b = (1.0 + eps) * c.c2
    if c1b <= 0:
        hint = f"; choose eps < c1/c2 = {c.c1 / c.c2:.3g}" if c.c2 > 0 else ""
        raise ConfigError(f"c1 - eps*c2 = {c1b:.3g} <= 0{hint}", field="eps")
    pm = build_propagation(c1b, c2b)
    base = pm.power_apply(k, [eL0, eH0])
    floor = (1.0 + 1.0 / eps) * delta_abs**2 / frob**2
    ones = np.ones(2)
    if c2b > 0:
        I = np.eye(2)
        acc = np.linalg.solve(I - pm.D, ones - pm.power_apply(k, ones))
    else:
        acc = sum((pm.power_apply(j, ones) for j in range(k)), np.zeros(2))
    out = base + floor * acc
    return float(out[0]), float(out[1])


def theorem_2_1_bound(kappa, k, e0_sq, delta_abs=0.0, sigma_min=None):
    """``(1 - kappa^-2)^k e0_sq``, plus ``delta^2/sigma_min^2`` for noisy data."""
    if kappa < 1:
        raise InputError("kappa must be at least 1")
    bound = (1.0 - kappa**-2.0) ** k * e0_sq
    if delta_abs:
        if not sigma_min:
            raise InputError("noisy bound needs sigma_min")
        bound += delta_abs**2 / sigma_min**2
    return bound


def sgd_statistics(system, x, b_used=None):
    """Mean and covariance of the weighted stochastic gradient ``g_i(x)``, closed form."""
    b = system.b if b_used is None else np.asarray(b_used, dtype=float)
    A = system.A
    n = system.n
    r = A @ x - b
    mean = A.T @ r / n
    g = A.T @ r
    weighted = (A * ((r**2) / system.row_norms_sq)[:, None]).T @ A
    cov = system.frob_sq / n**2 * weighted - np.outer(g, g) / n**2
    return mean, cov


def sgd_statistics_direct(system, x, b_used=None):
    """Same statistics as exact weighted sums over the ``n`` stochastic gradients."""
    b = system.b if b_used is None else np.asarray(b_used, dtype=float)
    A = system.A
    w = system.row_norms_sq
    G = (system.frob_sq / (system.n * w) * (A @ x - b))[:, None] * A
    p = system.p
    mean = p @ G
    centered = G - mean
    cov = (centered * p[:, None]).T @ centered
    return mean, cov


@dataclass(frozen=True)
class BandErrorRecord:
    k: int
    e_low: float
    e_high: float
    e_total: float
    residual_sq: float
    bands: tuple | None = None


def band_errors(split, x, x_true, system, b_used, k=0):
    """Squared band errors of ``x`` and its squared residual against ``b_used``."""
    if x_true is None:
        raise InputError("band errors need the true solution")
    if not isinstance(split, FrequencySplit):
        raise InputError("split must be a FrequencySplit")
    d = np.asarray(x, dtype=float) - x_true
    eL, eH = split.band_energies(d)
    r = system.A @ x - b_used
    return BandErrorRecord(k=k, e_low=float(eL), e_high=float(eH), e_total=float(d @ d), residual_sq=float(r @ r))
