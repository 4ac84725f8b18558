"""Kaczmarz-type iterations: KM, RKM, RKMVR and Landweber.

Row indices are 0-based throughout. Two interfaces share the same update
kernels:

* single-trajectory steps (:func:`km_step`, :func:`rkm_step`,
  :func:`rkmvr_step`, :func:`landweber_step`) acting on a
  :class:`SolverState`, convenient for replay tests;
* :func:`run_batch`, which advances ``R`` independent trajectories stacked as
  an ``R x m`` array, used by the experiment driver.

Both draw row indices identically: one ``rng.random()`` double per step,
mapped to a row by inverse-CDF lookup in the cumulative probabilities.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from rkm.errors import ConfigError

METHODS = ("km", "rkm", "rkmvr", "lm")


def cumulative_probabilities(p):
    c = np.cumsum(np.asarray(p, dtype=float))
    c[-1] = 1.0
    return c


def lookup_rows(cumulative_p, u):
    """Inverse-CDF lookup: the first row whose cumulative mass exceeds ``u``."""
    idx = np.searchsorted(cumulative_p, u, side="right")
    return np.minimum(idx, cumulative_p.size - 1)


@dataclass
class SolverState:
    x: np.ndarray
    k: int
    p: np.ndarray
    cumulative_p: np.ndarray
    row_norms_sq: np.ndarray
    rng: np.random.Generator | None = None


@dataclass
class RkmvrState:
    """RKMVR state; before the first snapshot ``snapshot`` is None and ``g_tilde`` zero."""

    inner: SolverState
    epoch: int
    snapshot: np.ndarray | None = None
    g_tilde: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.epoch < 1:
            raise ConfigError("epoch length must be positive", field="epoch")
        if self.g_tilde is None:
            self.g_tilde = np.zeros_like(self.inner.x)


@dataclass(frozen=True)
class StoppingRule:
    """Discrepancy principle: stop once ``||A x - b_delta|| <= tau * delta_abs``."""

    tau: float = 1.1
    delta_abs: float = 0.0

    def __post_init__(self):
        if not self.tau > 1.0:
            raise ConfigError(f"tau must exceed 1, got {self.tau}", field="tau")
        if self.delta_abs < 0:
            raise ConfigError("noise level must be nonnegative", field="delta")


def make_state(system, x0=None, rng=None):
    x = np.zeros(system.m) if x0 is None else np.array(x0, dtype=float)
    return SolverState(
        x=x,
        k=0,
        p=system.p,
        cumulative_p=cumulative_probabilities(system.p),
        row_norms_sq=system.row_norms_sq,
        rng=rng,
    )


def kaczmarz_update(A, row_norms_sq, b_used, x, i):
    """Project ``x`` onto the hyperplane ``<a_i, x> = b_i``.

    ``x`` may be a single vector with scalar ``i`` or an ``R x m`` stack with
    one row index per trajectory; ``b_used`` may then also be ``R x n``.
    """
    rows = A[i]
    if np.ndim(x) == 1:
        coef = (b_used[i] - rows @ x) / row_norms_sq[i]
        return x + coef * rows
    bi = b_used[i] if np.ndim(b_used) == 1 else b_used[np.arange(x.shape[0]), i]
    coef = (bi - np.einsum("rj,rj->r", rows, x)) / row_norms_sq[i]
    return x + coef[:, None] * rows


def sample_row_index(state):
    """Draw a row with probability ``p_i`` by inverse-CDF; advances ``state.rng``."""
    return int(lookup_rows(state.cumulative_p, state.rng.random()))


def km_step(state, system, b_used):
    """One cyclic Kaczmarz step using row ``k mod n``."""
    i = state.k % system.n
    x = kaczmarz_update(system.A, state.row_norms_sq, b_used, state.x, i)
    return replace(state, x=x, k=state.k + 1)


def rkm_step(state, system, b_used):
    """One randomized Kaczmarz step with a row drawn from ``state.p``."""
    i = sample_row_index(state)
    x = kaczmarz_update(system.A, state.row_norms_sq, b_used, state.x, i)
    return replace(state, x=x, k=state.k + 1)


def full_gradient(system, x, b_used):
    """Gradient of ``f(x) = ||A x - b||^2 / (2n)``, i.e. ``A^t (A x - b) / n``."""
    return (system.A.T @ (system.A @ x - b_used)) / system.n


def row_gradient(system, x, b_used, i):
    """``g_i(x) = ||A||_F^2 / (n ||a_i||^2) (<a_i, x> - b_i) a_i``."""
    a = system.A[i]
    w = system.row_norms_sq[i]
    return (system.frob_sq / (system.n * w)) * (a @ x - b_used[i]) * a


def sgd_step(system, x, b_used, i):
    """Weighted SGD step with the constant stepsize ``n / ||A||_F^2``."""
    return x - (system.n / system.frob_sq) * row_gradient(system, x, b_used, i)


def landweber_step(x, system, b_used):
    """``x - A^t (A x - b) / ||A||_F^2``."""
    return x - (system.A.T @ (system.A @ x - b_used)) / system.frob_sq


def rkmvr_step(state, system, b_used):
    """One step of RKM with variance reduction.

    When ``k`` is a positive multiple of the epoch the snapshot and its full
    gradient are refreshed first. The update is then::

        x - n/||A||_F^2 * (g_i(x) - g_i(x_snap) + g_snap)

    with ``g_i(x_snap)`` and ``g_snap`` both zero before the first snapshot.
    The discrepancy check is the caller's business (see :func:`run_batch`).
    """
    inner = state.inner
    if inner.k > 0 and inner.k % state.epoch == 0:
        state = replace(state, snapshot=inner.x.copy(), g_tilde=full_gradient(system, inner.x, b_used))
    i = sample_row_index(inner)
    step = system.n / system.frob_sq
    direction = row_gradient(system, inner.x, b_used, i) + state.g_tilde
    if state.snapshot is not None:
        direction = direction - row_gradient(system, state.snapshot, b_used, i)
    x = inner.x - step * direction
    return replace(state, inner=replace(inner, x=x, k=inner.k + 1))


def discrepancy_check(x, system, b_delta, rule):
    """True iff ``||A x - b_delta|| <= tau * delta_abs``."""
    if rule.delta_abs < 0:
        raise ConfigError("noise level must be nonnegative", field="delta")
    return bool(np.linalg.norm(system.A @ x - b_delta) <= rule.tau * rule.delta_abs)


def step_cost(method, n):
    """Unit row operations charged per plain step (snapshots are extra)."""
    return n if method == "lm" else 1


@dataclass
class BatchResult:
    """Final iterates and stopping information of a batch of trajectories."""

    x: np.ndarray
    k: np.ndarray
    cost: np.ndarray
    stopped: np.ndarray


def run_batch(
    method,
    system,
    b_used,
    x0,
    iters,
    *,
    rngs=None,
    epoch=None,
    rule=None,
    record=None,
    record_every=1,
    chunk=4096,
):
    """Advance ``R`` trajectories of ``method`` for up to ``iters`` steps.

    Parameters
    ----------
    method : {"km", "rkm", "rkmvr", "lm"}
    system : LinearSystem
    b_used : ndarray
        Right side, shape ``(n,)`` or ``(R, n)`` for per-trajectory data.
    x0 : ndarray
        Initial iterate, shape ``(m,)`` (shared) or ``(R, m)``.
    iters : int
        Hard cap ``K`` on the number of steps.
    rngs : list of numpy Generators, optional
        One per trajectory; required for the randomized methods. Their length
        fixes ``R``.
    epoch : int, optional
        Snapshot period ``s`` of RKMVR, and the discrepancy-check period of
        KM and RKM. Defaults to ``n``.
    rule : StoppingRule or sequence of StoppingRule, optional
        Discrepancy principle (one rule, or one per trajectory). LM checks it
        before every step, the other methods at ``k = 0`` and at multiples of
        the epoch, charging ``n`` units per check after ``k = 0``.
    record : callable, optional
        ``record(k, X, cost)`` is called at ``k = 0``, every
        ``record_every`` steps, and at the final step. Stopped trajectories
        stay frozen at their stopping iterate and cost.

    Returns
    -------
    BatchResult
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}", field="method")
    if iters < 0:
        raise ConfigError("iteration count must be nonnegative", field="iters")
    n = system.n
    A = system.A
    w = system.row_norms_sq
    s = n if epoch is None else int(epoch)
    if s < 1:
        raise ConfigError("epoch length must be positive", field="epoch")

    randomized = method in ("rkm", "rkmvr")
    if randomized and not rngs:
        raise ConfigError(f"method {method} needs random generators", field="runs")
    b_arr = np.asarray(b_used, dtype=float)
    if rngs:
        R = len(rngs)
    elif b_arr.ndim == 2:
        R = b_arr.shape[0]
    elif np.ndim(x0) == 2:
        R = np.shape(x0)[0]
    else:
        R = 1
    X = np.array(np.broadcast_to(np.asarray(x0, dtype=float), (R, system.m)))
    B = np.broadcast_to(b_arr, (R, n)) if b_arr.ndim == 2 else b_arr

    if rule is None:
        limits = None
    else:
        rules = [rule] * R if isinstance(rule, StoppingRule) else list(rule)
        if len(rules) != R:
            raise ConfigError("need one stopping rule per trajectory", field="tau")
        limits = np.array([r.tau * r.delta_abs for r in rules])

    cumulative_p = cumulative_probabilities(system.p)
    stopped = np.zeros(R, dtype=bool)
    stop_k = np.full(R, iters, dtype=np.int64)
    cost = np.zeros(R)
    frob_sq = system.frob_sq
    snap = None
    snap_corr = np.zeros((R, system.m))  # (n/||A||_F^2) * g_snap

    def check(k, active):
        nonlocal stopped
        if limits is None:
            return
        hit = active & (np.linalg.norm(X @ A.T - B, axis=1) <= limits)
        stopped = stopped | hit
        stop_k[hit] = k

    last = 0
    if record is not None:
        record(0, X, cost.copy())
    check(0, ~stopped)

    rows = None
    k = 0
    for k in range(iters):
        if stopped.all():
            break
        active = ~stopped
        if randomized and k % chunk == 0:
            span = min(chunk, iters - k)
            rows = np.stack([lookup_rows(cumulative_p, g.random(span)) for g in rngs])
        if method == "lm":
            if k > 0:
                check(k, active)
                active = ~stopped
                if not active.any():
                    break
            Xn = X - ((X @ A.T - B) @ A) / frob_sq
            cost[active] += n
        else:
            if k > 0 and k % s == 0:
                if method == "rkmvr":
                    resid = X @ A.T - B
                    snap = X.copy()
                    snap_corr = (resid @ A) / frob_sq
                    cost[active] += n
                    if limits is not None:
                        hit = active & (np.linalg.norm(resid, axis=1) <= limits)
                        stopped = stopped | hit
                        stop_k[hit] = k
                elif limits is not None:
                    cost[active] += n
                    check(k, active)
                active = ~stopped
                if not active.any():
                    break
            if method == "km":
                Xn = kaczmarz_update(A, w, B, X, np.full(R, k % n))
            else:
                i = rows[:, k % chunk]
                Xn = kaczmarz_update(A, w, B, X, i)
                if method == "rkmvr" and snap is not None:
                    a = A[i]
                    Bi = B[i] if B.ndim == 1 else B[np.arange(R), i]
                    # + (n/||A||_F^2) g_i(x_snap) - (n/||A||_F^2) g_snap
                    corr = (np.einsum("rj,rj->r", a, snap) - Bi) / w[i]
                    Xn = Xn + corr[:, None] * a - snap_corr
            cost[active] += 1
        X[active] = Xn[active]
        kk = k + 1
        if record is not None and (kk % record_every == 0 or kk == iters):
            record(kk, X, cost.copy())
            last = kk
    else:
        k = iters
    if record is not None and last != k and k > 0:
        record(k, X, cost.copy())
    return BatchResult(x=X, k=stop_k, cost=cost, stopped=stopped)
