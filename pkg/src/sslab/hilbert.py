"""Local spin/boson algebras, many-body embedding and charge sectors.

Basis ordering is the Kronecker ordering: site 0 is the most significant
digit and the local index runs fastest on the last site. For spins the
local index 0 is ``m = +S`` (so for spin-1/2, index 0 is up); for bosons it
is the occupation number.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .lattice import Lattice


@dataclass(frozen=True)
class LocalAlgebra:
    kind: str  # "spin" or "boson"
    raising: np.ndarray
    lowering: np.ndarray
    diag: np.ndarray  # S^z or n
    offset: float  # charge per site = diag + offset

    @property
    def dim(self) -> int:
        return self.raising.shape[0]

    @property
    def charge(self) -> np.ndarray:
        """Per-level charge ``n`` (``S^z + S`` for spins)."""
        return np.real(np.diag(self.diag)) + self.offset

    @property
    def spin(self) -> float:
        return (self.dim - 1) / 2


def spin_algebra(S) -> LocalAlgebra:
    """Spin-S matrices with ``S^z = diag(S, S-1, ..., -S)``."""
    two_s = Fraction(S) * 2
    if two_s.denominator != 1 or two_s < 1:
        raise ValueError(f"S must be a positive half-integer, got {S}")
    S = float(S)
    m = S - np.arange(int(two_s) + 1)
    # S+ |m> = sqrt(S(S+1) - m(m+1)) |m+1>, and |m+1> sits one index up
    up = np.sqrt(S * (S + 1) - m[1:] * (m[1:] + 1))
    splus = np.diag(up, k=1).astype(complex)
    return LocalAlgebra("spin", splus, splus.conj().T.copy(), np.diag(m).astype(complex), S)


def boson_algebra(n_max: int) -> LocalAlgebra:
    """Bosons truncated at ``n_max`` quanta; ``b^dagger |n_max> = 0``."""
    if int(n_max) < 1:
        raise ValueError("n_max must be >= 1")
    n = np.arange(int(n_max) + 1)
    bdag = np.diag(np.sqrt(n[1:]), k=-1).astype(complex)
    return LocalAlgebra("boson", bdag, bdag.conj().T.copy(), np.diag(n).astype(complex), 0.0)


def _n_sites(where) -> int:
    return where.site_count if isinstance(where, Lattice) else int(where)


def embed(local, site: int, where, algebra: LocalAlgebra | int) -> sp.csr_matrix:
    """Place a single-site matrix on ``site`` with identities elsewhere.

    ``where`` is a :class:`Lattice` or a site count; ``algebra`` may be given
    as the local dimension directly.
    """
    n = _n_sites(where)
    dim = algebra if isinstance(algebra, int) else algebra.dim
    if not 0 <= site < n:
        raise IndexError(f"site {site} out of range for {n} sites")
    left = sp.identity(dim**site, dtype=complex, format="csr")
    right = sp.identity(dim ** (n - site - 1), dtype=complex, format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(local)), right, format="csr")


def site_digits(n_sites: int, dim: int) -> np.ndarray:
    """Local level of every site for every basis state, shape ``(dim**n, n)``."""
    idx = np.arange(dim**n_sites)
    powers = dim ** np.arange(n_sites - 1, -1, -1)
    return (idx[:, None] // powers[None, :]) % dim


@dataclass(frozen=True)
class ChargeOperator:
    values: np.ndarray  # charge of each basis state

    @property
    def op(self) -> sp.csr_matrix:
        return sp.diags(self.values.astype(complex), format="csr")

    @property
    def dim(self) -> int:
        return len(self.values)


def total_charge(where, algebra: LocalAlgebra, weights=None) -> ChargeOperator:
    """``N = sum_i w_i n_i`` with ``n_i = S^z_i + S`` (spins) or ``b^dagger b`` (bosons)."""
    n = _n_sites(where)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    digits = site_digits(n, algebra.dim)
    return ChargeOperator(algebra.charge[digits] @ w)


def sector_basis(charge: ChargeOperator, value) -> np.ndarray:
    """Sorted basis indices with the given charge (empty if unattained)."""
    return np.flatnonzero(np.abs(charge.values - value) < 1e-9)


def charge_sectors(charge: ChargeOperator) -> list[float]:
    return sorted(set(np.round(charge.values, 9).tolist()))


def basis_translation(site_perm, dim: int) -> np.ndarray:
    """Basis permutation induced by moving site ``i`` to ``site_perm[i]``.

    Returns ``p`` with ``T|s> = |p[s]>``.
    """
    site_perm = np.asarray(site_perm)
    n = len(site_perm)
    digits = site_digits(n, dim)
    moved = np.empty_like(digits)
    moved[:, site_perm] = digits
    powers = dim ** np.arange(n - 1, -1, -1)
    return moved @ powers
