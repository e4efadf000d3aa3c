"""Order-parameter and strong-to-weak symmetry-breaking diagnostics on density matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import hilbert
from .lattice import Lattice
from .lindblad import LindbladSpec, sector_block
from .spectral import spectrum


class InvalidStateError(ValueError):
    pass


def check_density_matrix(rho, tol: float = 1e-9) -> np.ndarray:
    """Return ``rho`` as an array after checking Hermiticity, trace and positivity."""
    rho = np.asarray(rho.toarray() if sp.issparse(rho) else rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidStateError("density matrix must be square")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise InvalidStateError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise InvalidStateError(f"trace is {np.trace(rho).real:.6g}, expected 1")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-8:
        raise InvalidStateError("density matrix has a negative eigenvalue")
    return rho


def _sites_and_algebra(dim: int, algebra: hilbert.LocalAlgebra | None):
    alg = algebra if algebra is not None else hilbert.spin_algebra(0.5)
    n = int(round(np.log(dim) / np.log(alg.dim)))
    if alg.dim**n != dim:
        raise InvalidStateError(f"dimension {dim} is not a power of the local dimension {alg.dim}")
    return n, alg


def _expect(rho: np.ndarray, op: sp.spmatrix) -> complex:
    # tr(rho A) = sum_jk rho_jk A_kj
    return complex(np.sum(rho * op.T.toarray()) if op.shape[0] <= 256 else (op @ rho).trace())


def _ladder(i: int, n: int, alg, raising: bool) -> sp.csr_matrix:
    return hilbert.embed(alg.raising if raising else alg.lowering, i, n, alg)


def two_point(rho, i: int, j: int, algebra: hilbert.LocalAlgebra | None = None) -> complex:
    """``tr(rho a_i^dag a_j)``; for spin-1/2, ``a^dag = sigma^+``."""
    rho = np.asarray(rho, dtype=complex)
    n, alg = _sites_and_algebra(rho.shape[0], algebra)
    op = _ladder(i, n, alg, True) @ _ladder(j, n, alg, False)
    return _expect(rho, op)


def purity(rho) -> float:
    rho = np.asarray(rho, dtype=complex)
    return float(np.real(np.vdot(rho.conj().T, rho)))


def renyi2_correlator(rho, i: int, j: int, algebra: hilbert.LocalAlgebra | None = None) -> float:
    """``tr(rho a_i^dag a_j rho a_i a_j^dag) / tr(rho^2)``.

    The operator order is kept as in the definition; the imaginary part of the trace is
    checked to vanish.
    """
    if i == j:
        raise ValueError("the Renyi-2 correlator needs i != j")
    rho = np.asarray(rho, dtype=complex)
    n, alg = _sites_and_algebra(rho.shape[0], algebra)
    p = purity(rho)
    if p <= 1e-300:
        raise InvalidStateError("state has zero purity")
    left = (_ladder(i, n, alg, True) @ _ladder(j, n, alg, False)).toarray()
    right = (_ladder(i, n, alg, False) @ _ladder(j, n, alg, True)).toarray()
    val = np.trace(rho @ left @ rho @ right)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"Renyi-2 numerator is not real ({val})")
    return float(val.real / p)


def filling(rho, where, algebra: hilbert.LocalAlgebra | None = None) -> float:
    """``tr(rho N) / (n_sites * n_max)`` with ``n_max`` the largest local charge."""
    rho = np.asarray(rho, dtype=complex)
    n = where.site_count if isinstance(where, Lattice) else int(where)
    alg = algebra if algebra is not None else hilbert.spin_algebra(0.5)
    q = hilbert.total_charge(n, alg).values
    if len(q) != rho.shape[0]:
        raise InvalidStateError("state dimension does not match the lattice")
    return float(np.real(np.diag(rho) @ q) / (n * alg.charge.max()))


def maximally_mixed(charge: hilbert.ChargeOperator, N) -> np.ndarray:
    """``I^N``: the normalized projector on the charge-``N`` sector."""
    idx = hilbert.sector_basis(charge, N)
    if len(idx) == 0:
        raise ValueError(f"no states with charge {N}")
    rho = np.zeros((charge.dim, charge.dim), dtype=complex)
    rho[idx, idx] = 1 / len(idx)
    return rho


def closest_kernel_state(kernel: list[np.ndarray], target: np.ndarray) -> np.ndarray:
    """Trace-normalized element of ``span(kernel)`` nearest to ``target`` in Frobenius norm."""
    if not kernel:
        raise ValueError("empty kernel")
    A = np.array([K.reshape(-1) for K in kernel]).T
    c, *_ = np.linalg.lstsq(A, target.reshape(-1), rcond=None)
    rho = (A @ c).reshape(target.shape)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise ValueError("projection onto the kernel is traceless")
    return rho / tr


@dataclass
class SWSSBWitness:
    renyi2: float
    two_point: complex
    state: np.ndarray
    kernel_dim: int


def swssb_witness(spec: LindbladSpec, N, i: int, j: int, algebra: hilbert.LocalAlgebra | None = None) -> SWSSBWitness:
    """Both correlators on the steady state of the diagonal sector ``(N, N)``."""
    if spec.charge is None:
        raise ValueError("spec has no charge")
    res = spectrum(sector_block(spec, (N, N)))
    if not res.steady_states:
        raise ValueError(f"sector ({N}, {N}) has no steady state")
    rho = closest_kernel_state(res.steady_states, maximally_mixed(spec.charge, N))
    if algebra is None and spec.local_dim and spec.local_dim != 2:
        algebra = hilbert.spin_algebra((spec.local_dim - 1) / 2)
    return SWSSBWitness(renyi2_correlator(rho, i, j, algebra), two_point(rho, i, j, algebra), rho, res.kernel_dim)
