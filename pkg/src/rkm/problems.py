"""Test systems: the circle example and three Fredholm first-kind kernels.

The kernels are discretized by the midpoint rule on ``n`` equal cells,
``A[i, j] = h * K(s_i, t_j)``, and the exact data are always synthesized as
``b = A @ x_true`` so that ``b`` lies in the range of ``A``.
"""

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from rkm import rng as rng_mod
from rkm.errors import ConfigError, InputError
from rkm.linalg import as_matrix, row_norms_sq, row_probabilities, svd

KINDS = ("phillips", "gravity", "shaw")


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Linear system ``A x = b`` with an optional known solution."""

    A: np.ndarray
    b: np.ndarray
    x_true: np.ndarray | None = None
    name: str = "system"

    def __post_init__(self):
        A = as_matrix(self.A)
        b = np.asarray(self.b, dtype=float)
        if b.shape != (A.shape[0],):
            raise InputError(f"right side has shape {b.shape}, expected ({A.shape[0]},)")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if self.x_true is not None:
            x = np.asarray(self.x_true, dtype=float)
            if x.shape != (A.shape[1],):
                raise InputError(f"solution has shape {x.shape}, expected ({A.shape[1]},)")
            object.__setattr__(self, "x_true", x)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.A.shape[1]

    @cached_property
    def row_norms_sq(self):
        return row_norms_sq(self.A)

    @cached_property
    def frob_sq(self):
        return float(self.row_norms_sq.sum())

    @cached_property
    def frob(self):
        return float(np.sqrt(self.frob_sq))

    @cached_property
    def p(self):
        return row_probabilities(self.A)

    @cached_property
    def basis(self):
        return svd(self.A)

    def consistency_gap(self):
        """``||A x_true - b||``, or None when no solution is attached."""
        if self.x_true is None:
            return None
        return float(np.linalg.norm(self.A @ self.x_true - self.b))

    def with_solution(self, x_true, name=None):
        """Same matrix, new solution and matching exact data ``A x_true``."""
        x_true = np.asarray(x_true, dtype=float)
        return LinearSystem(self.A, self.A @ x_true, x_true, name or self.name)


@dataclass(frozen=True, eq=False)
class NoisyObservation:
    b_delta: np.ndarray
    eta: np.ndarray
    delta_rel: float
    delta_abs: float


def make_circle(n):
    """``n`` unit rows ``(cos (i-1)theta, sin (i-1)theta)``, ``theta = 2 pi / n``.

    The exact solution is zero. For ``n >= 3`` every Kaczmarz projection with
    a uniformly drawn row halves the expected squared error.
    """
    if n < 3:
        raise ConfigError("circle system needs n >= 3", field="n")
    angle = 2.0 * np.pi * np.arange(n) / n
    A = np.column_stack([np.cos(angle), np.sin(angle)])
    return LinearSystem(A, np.zeros(n), np.zeros(2), f"circle{n}")


def _midpoints(lo, hi, n):
    h = (hi - lo) / n
    return lo + h * (np.arange(n) + 0.5), h


def _phillips(n):
    t, h = _midpoints(-6.0, 6.0, n)

    def bump(z):
        return np.where(np.abs(z) < 3.0, 1.0 + np.cos(np.pi * z / 3.0), 0.0)

    A = h * bump(t[:, None] - t[None, :])
    return A, bump(t)


def _gravity(n, depth=0.25):
    t, h = _midpoints(0.0, 1.0, n)
    A = h * depth * (depth**2 + (t[:, None] - t[None, :]) ** 2) ** -1.5
    x = np.sin(np.pi * t) + 0.5 * np.sin(2.0 * np.pi * t)
    return A, x


def _shaw(n):
    t, h = _midpoints(-np.pi / 2, np.pi / 2, n)
    c, s = np.cos(t), np.sin(t)
    u = np.pi * (s[:, None] + s[None, :])
    # sinc(z) = sin(pi z)/(pi z), so sin(u)/u = sinc(u/pi), with value 1 at u = 0
    A = h * (c[:, None] + c[None, :]) ** 2 * np.sinc(u / np.pi) ** 2
    x = 2.0 * np.exp(-6.0 * (t - 0.8) ** 2) + np.exp(-6.0 * (t + 0.5) ** 2)
    return A, x


_BUILDERS = {"phillips": _phillips, "gravity": _gravity, "shaw": _shaw}


def make_problem(kind, n):
    """Discretized ``phillips``, ``gravity`` or ``shaw`` test problem of size n-by-n."""
    if kind not in _BUILDERS:
        raise ConfigError(f"unknown problem kind {kind!r}; expected one of {KINDS}", field="problem")
    if n < 10:
        raise ConfigError("test problems need n >= 10", field="n")
    A, x = _BUILDERS[kind](int(n))
    return LinearSystem(A, A @ x, x, kind)


def add_noise(b, delta_rel, rng):
    """Perturb ``b`` by ``delta_rel * max|b_j| * xi`` with standard Gaussian ``xi``.

    The Gaussian draws are consumed even when ``delta_rel == 0`` so that the
    state of ``rng`` afterwards does not depend on the noise level.
    """
    b = np.asarray(b, dtype=float)
    if delta_rel < 0:
        raise ConfigError("relative noise level must be nonnegative", field="delta")
    xi = rng_mod.standard_normal(rng, b.size)
    scale = float(delta_rel) * float(np.max(np.abs(b))) if b.size else 0.0
    eta = scale * xi
    return NoisyObservation(
        b_delta=b + eta,
        eta=eta,
        delta_rel=float(delta_rel),
        delta_abs=float(np.linalg.norm(eta)),
    )


def random_solution(m, rng):
    """Vector of ``m`` i.i.d. standard Gaussian entries."""
    if m < 1:
        raise ConfigError("solution length must be positive", field="m")
    return rng_mod.standard_normal(rng, m)


def export_system_csv(system, directory):
    """Write ``A.csv``, ``b.csv`` and (if known) ``x_true.csv`` into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"A": out / "A.csv", "b": out / "b.csv"}
    with open(paths["A"], "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in system.A:
            writer.writerow([repr(float(v)) for v in row])
    _write_vector(paths["b"], system.b)
    if system.x_true is not None:
        paths["x_true"] = out / "x_true.csv"
        _write_vector(paths["x_true"], system.x_true)
    return paths


def _write_vector(path, v):
    with open(path, "w") as fh:
        fh.writelines(f"{float(x)!r}\n" for x in v)


def load_system_csv(directory, name="loaded"):
    """Inverse of :func:`export_system_csv`."""
    d = Path(directory)
    A = np.loadtxt(d / "A.csv", delimiter=",", ndmin=2)
    b = np.loadtxt(d / "b.csv", ndmin=1)
    x_path = d / "x_true.csv"
    x = np.loadtxt(x_path, ndmin=1) if x_path.exists() else None
    return LinearSystem(A, b, x, name)
