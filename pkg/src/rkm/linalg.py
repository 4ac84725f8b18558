"""Dense linear algebra: SVD, spectral constants and frequency projectors.

Matrices are plain 2-D float64 ndarrays. The right singular vectors
``v_1, ..., v_m`` (columns of ``V``) define the frequency bands: a cutoff
``L`` splits any ``z`` into the low part spanned by ``v_1..v_L`` and the
high part spanned by ``v_{L+1}..v_m``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from rkm.errors import ConfigError, InputError

#: singular values below ``RANK_RTOL * sigma_1`` count as zero
RANK_RTOL = 1e-12


def as_matrix(A):
    """Validate and return ``A`` as a finite 2-D float64 array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise InputError(f"expected a nonempty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    return A


@dataclass(frozen=True, eq=False)
class SvdBasis:
    """Full SVD ``A = U diag(s) V^t`` with ``U`` n-by-n and ``V`` m-by-m.

    ``s`` has length ``min(n, m)`` and is sorted nonincreasingly.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def shape(self):
        return self.U.shape[0], self.V.shape[0]

    def sigma(self, i):
        """Singular value ``sigma_i`` with 1-based ``i``; zero beyond ``r``."""
        if i < 1:
            raise ValueError("singular value index is 1-based")
        return float(self.s[i - 1]) if i <= self.s.size else 0.0

    def reconstruct(self):
        n, m = self.shape
        S = np.zeros((n, m))
        r = self.s.size
        S[:r, :r] = np.diag(self.s)
        return self.U @ S @ self.V.T


def svd(A):
    """Full singular value decomposition of ``A``.

    Raises
    ------
    InputError
        If ``A`` is empty or has non-finite entries.
    """
    A = as_matrix(A)
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    return SvdBasis(U=U, s=s, V=Vt.T)


@dataclass(frozen=True)
class SpectralConstants:
    frob_norm: float
    sigma_max: float
    sigma_min: float
    kappa: float
    numeric_rank: int


def spectral_constants(basis, frob):
    """Frobenius norm, extreme singular values and ``kappa = ||A||_F ||A^+||_2``.

    ``sigma_min`` is the smallest singular value above the drop tolerance
    ``RANK_RTOL * sigma_1``; ``||A^+||_2 = 1 / sigma_min``.
    """
    s = basis.s
    if s.size == 0 or s[0] == 0.0:
        raise InputError("condition number undefined for the zero matrix")
    keep = s > RANK_RTOL * s[0]
    sigma_min = float(s[keep][-1])
    return SpectralConstants(
        frob_norm=float(frob),
        sigma_max=float(s[0]),
        sigma_min=sigma_min,
        kappa=float(frob) / sigma_min,
        numeric_rank=int(np.count_nonzero(keep)),
    )


def row_norms_sq(A):
    A = np.asarray(A, dtype=float)
    return np.einsum("ij,ij->i", A, A)


def row_probabilities(A):
    """Sampling probabilities ``p_i = ||a_i||^2 / ||A||_F^2``.

    Raises
    ------
    InputError
        If some row is identically zero; the message names its 0-based index.
    """
    A = as_matrix(A)
    w = row_norms_sq(A)
    zero = np.flatnonzero(w == 0.0)
    if zero.size:
        raise InputError(f"row {int(zero[0])} of the matrix is zero")
    return w / w.sum()


def _check_level(level, m):
    if not (1 <= level <= m):
        raise ConfigError(f"truncation level {level} outside [1, {m}]", field="level")


@dataclass(frozen=True, eq=False)
class FrequencySplit:
    """Low/high frequency split of R^m at cutoff ``level``."""

    basis: SvdBasis
    level: int

    def __post_init__(self):
        _check_level(self.level, self.basis.V.shape[0])

    @cached_property
    def P_low(self):
        VL = self.basis.V[:, : self.level]
        return VL @ VL.T

    @cached_property
    def P_high(self):
        VH = self.basis.V[:, self.level :]
        return VH @ VH.T

    def project(self, z):
        """Return ``(P_L z, P_H z)``."""
        z = np.asarray(z, dtype=float)
        V = self.basis.V
        if z.shape[-1] != V.shape[0]:
            raise InputError(f"vector length {z.shape[-1]} != {V.shape[0]}")
        VL, VH = V[:, : self.level], V[:, self.level :]
        return (z @ VL) @ VL.T, (z @ VH) @ VH.T

    def band_energies(self, z):
        """``(||P_L z||^2, ||P_H z||^2)``; ``z`` may be stacked row-wise."""
        c = np.asarray(z, dtype=float) @ self.basis.V
        c2 = c * c
        return c2[..., : self.level].sum(axis=-1), c2[..., self.level :].sum(axis=-1)


def project(split, z):
    """Split ``z`` into its low- and high-frequency components."""
    return split.project(z)


def band_slices(boundaries, m):
    """Index slices for the bands cut at 1-based ``boundaries``.

    ``(3, 6, 9)`` on R^12 gives bands ``v_1..v_3``, ``v_4..v_6``,
    ``v_7..v_9`` and ``v_10..v_12``.
    """
    bounds = [int(b) for b in boundaries]
    if not bounds:
        raise ConfigError("at least one band boundary is required", field="bands")
    if any(b < 1 or b > m for b in bounds):
        raise ConfigError(f"band boundaries must lie in [1, {m}]", field="bands")
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
        raise ConfigError("band boundaries must be strictly increasing", field="bands")
    edges = [0, *bounds, m]
    return [slice(lo, hi) for lo, hi in zip(edges, edges[1:])]


def multi_band_project(basis, boundaries, z):
    """Components of ``z`` in each frequency band; they sum to ``z``."""
    z = np.asarray(z, dtype=float)
    V = basis.V
    return [(z @ V[:, sl]) @ V[:, sl].T for sl in band_slices(boundaries, V.shape[0])]


def multi_band_energies(basis, boundaries, z):
    """Squared norms of the band components; ``z`` may be stacked row-wise."""
    c = np.asarray(z, dtype=float) @ basis.V
    c2 = c * c
    return np.stack([c2[..., sl].sum(axis=-1) for sl in band_slices(boundaries, basis.V.shape[0])], axis=-1)
