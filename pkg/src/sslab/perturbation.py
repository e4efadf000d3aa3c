"""Perturbative effective generators for models I and III.

Model I: first-order magnon hopping in the ``N_L - N_R = 1`` sector around
the pure-dissipation fixed point. Model III: second-order dynamics of the
diagonal (configuration) subspace under dephasing, which acts as a
ferromagnetic Heisenberg Hamiltonian in configuration space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from . import hilbert
from .lattice import Lattice
from .lindblad import model_I, model_III, sector_block, vectorize
from .spectral import momentum_basis, momentum_blocks

ED_MAX_SITES = 6


class SystemTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class EffectiveGenerator:
    matrix: np.ndarray | sp.spmatrix
    basis_labels: list
    order: int
    kind: str  # "liouvillian" or "hamiltonian"

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)

    def eigenvalues(self) -> np.ndarray:
        A = self.dense()
        if self.kind == "hamiltonian":
            return la.eigvalsh(A)
        vals = la.eigvals(A)
        return vals[np.lexsort((-vals.imag, -vals.real))]


# --------------------------------------------------------------------------
# single site


@dataclass(frozen=True)
class EigenTriple:
    eigenvalue: float
    left: np.ndarray
    right: np.ndarray


def single_site_loss_spectrum(Gamma: float) -> list[EigenTriple]:
    """Eigen-operators of ``Gamma D(sigma^-)`` for one spin.

    Matrices use the package basis (index 0 = up, index 1 = down). Both
    ``-Gamma`` rows use equal left and right operators, which is what
    biorthonormality ``tr(e_m^L^dag e_n^R) = delta_mn`` requires.
    """
    if Gamma < 0:
        raise ValueError("Gamma must be nonnegative")
    up = np.array([[1, 0], [0, 0]], dtype=complex)  # |1><1|
    dn = np.array([[0, 0], [0, 1]], dtype=complex)  # |0><0|
    up_dn = np.array([[0, 1], [0, 0]], dtype=complex)  # |1><0|
    dn_up = up_dn.T.copy()  # |0><1|
    return [
        EigenTriple(0.0, up + dn, dn),
        EigenTriple(-Gamma, up_dn, up_dn),
        EigenTriple(-Gamma, dn_up, dn_up),
        EigenTriple(-2 * Gamma, up, up - dn),
    ]


def biorthonormality_matrix(triples) -> np.ndarray:
    return np.array([[np.trace(a.left.conj().T @ b.right) for b in triples] for a in triples])


# --------------------------------------------------------------------------
# model I


def effective_liouvillian_I(lattice: Lattice, J: float, Gamma: float) -> EffectiveGenerator:
    """First-order magnon generator on site labels.

    ``-Gamma`` on the diagonal, ``+iJ`` from A to B neighbours and ``-iJ``
    from B to A. The matrix is ``-Gamma`` plus a Hermitian hopping, so its
    spectrum is real and lies in ``[-Gamma - 2Jd, -Gamma + 2Jd]``.
    """
    n = lattice.site_count
    M = -Gamma * np.eye(n, dtype=complex)
    for a, b in lattice.ab_bonds():
        M[b, a] += 1j * J
        M[a, b] -= 1j * J
    return EffectiveGenerator(M, list(range(n)), 1, "liouvillian")


def exact_dN1_spectrum(lattice: Lattice, J: float, Gamma: float) -> np.ndarray:
    if lattice.site_count > ED_MAX_SITES:
        raise SystemTooLargeError(f"ED limited to {ED_MAX_SITES} sites")
    block = sector_block(model_I(lattice, J, 0.0, Gamma), 1)
    vals = la.eigvals(block.matrix.toarray())
    return vals[np.lexsort((-vals.imag, -vals.real))]


def compare_perturbative_I(lattice: Lattice, J: float, Gamma: float) -> float:
    """Largest distance between effective and matched exact dN=1 eigenvalues.

    Exact eigenvalues are assigned one-to-one to the effective ones by
    minimal total distance.
    """
    exact = exact_dN1_spectrum(lattice, J, Gamma)
    eff = effective_liouvillian_I(lattice, J, Gamma).eigenvalues()
    cost = np.abs(eff[:, None] - exact[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


# --------------------------------------------------------------------------
# model III


def _xy_hamiltonian(L: int, S, J_xy: float) -> tuple[sp.csr_matrix, hilbert.LocalAlgebra]:
    alg = hilbert.spin_algebra(S)
    H = sp.csr_matrix((alg.dim**L, alg.dim**L), dtype=complex)
    for i in range(L):
        j = (i + 1) % L
        H = H + (J_xy / 2) * (
            hilbert.embed(alg.raising, i, L, alg) @ hilbert.embed(alg.lowering, j, L, alg)
            + hilbert.embed(alg.lowering, i, L, alg) @ hilbert.embed(alg.raising, j, L, alg)
        )
    return H.tocsr(), alg


def config_rate_matrix(L: int, S, J_xy: float, Gamma: float) -> sp.csr_matrix:
    """Second-order generator on configuration probabilities.

    A transition ``c -> c'`` through the coherence ``|c'><c|`` has rate
    ``2 |<c'|H|c>|^2 / r`` with ``r = Gamma sum_i (m_i(c') - m_i(c))^2``
    the dephasing rate of that coherence. Columns sum to zero.
    """
    if Gamma <= 0:
        raise ValueError("second-order theory needs Gamma > 0")
    H, alg = _xy_hamiltonian(L, S, J_xy)
    m = np.real(np.diag(alg.diag))[hilbert.site_digits(L, alg.dim)]
    coo = sp.triu(H, k=1).tocoo()
    r = Gamma * np.sum((m[coo.row] - m[coo.col]) ** 2, axis=1)
    w = 2 * np.abs(coo.data) ** 2 / r
    D = alg.dim**L
    W = sp.csr_matrix((np.r_[w, w], (np.r_[coo.row, coo.col], np.r_[coo.col, coo.row])), shape=(D, D))
    out = np.asarray(W.sum(axis=0)).ravel()
    return (W - sp.diags(out)).tocsr()


def effective_heisenberg_III(L: int, J_xy: float, Gamma: float, S=0.5, sign_corrected: bool = True) -> EffectiveGenerator:
    """``H_eff = -L_eff`` on configurations, second order in ``J_xy``.

    For ``S = 1/2`` the closed form
    ``(J_xy^2 / 2 Gamma) sum_i [1/4 - S^z_i S^z_{i+1} - (S^+_i S^-_{i+1} + h.c.) / 2]``
    is used. The opposite overall sign (``sign_corrected=False``) has a
    nonpositive spectrum and is provided for comparison only. Other spins use
    :func:`config_rate_matrix`.
    """
    if Gamma <= 0:
        raise ValueError("second-order theory needs Gamma > 0")
    alg = hilbert.spin_algebra(S)
    if alg.dim == 2:
        D = 2**L
        H = sp.csr_matrix((D, D), dtype=float)
        eye = sp.identity(D, format="csr")
        sz = [hilbert.embed(alg.diag, i, L, alg).real for i in range(L)]
        spl = [hilbert.embed(alg.raising, i, L, alg).real for i in range(L)]
        smi = [hilbert.embed(alg.lowering, i, L, alg).real for i in range(L)]
        for i in range(L):
            j = (i + 1) % L
            H = H + 0.25 * eye - sz[i] @ sz[j] - 0.5 * (spl[i] @ smi[j] + smi[i] @ spl[j])
        H = (J_xy**2 / (2 * Gamma)) * H
    else:
        H = -config_rate_matrix(L, S, J_xy, Gamma).real
    if not sign_corrected:
        H = -H
    labels = [tuple(row) for row in (alg.spin - hilbert.site_digits(L, alg.dim))]
    return EffectiveGenerator(sp.csr_matrix(H), labels, 2, "hamiltonian")


def second_order_superoperator_III(L: int, S, J_xy: float, J_z: float, Gamma: float) -> np.ndarray:
    """``-P V Q L0^-1 Q V P`` on the diagonal subspace, from the full superoperator.

    ``L0`` is pure dephasing and ``V = -i[H_XXZ, .]``. Returned in the
    configuration basis; independent oracle for :func:`config_rate_matrix`.
    """
    spec = model_III(L, S, J_xy, J_z, Gamma)
    dephasing = model_III(L, S, 0.0, 0.0, Gamma)
    L0 = vectorize(dephasing).matrix.diagonal()
    V = (vectorize(spec).matrix - vectorize(dephasing).matrix).tocsr()
    D = spec.dim
    diag_idx = np.arange(D) * (D + 1)
    q = np.abs(L0) > 1e-12
    VP = V[:, diag_idx].toarray()
    inner = np.where(q[:, None], VP / np.where(q, L0, 1)[:, None], 0)
    return -(V[diag_idx, :] @ inner).real


def effective_momentum_spectrum(L: int, J_xy: float, Gamma: float, S=0.5, charge=None) -> dict:
    """Eigenvalues of ``H_eff`` per (charge, momentum ``2 pi m / L``)."""
    gen = effective_heisenberg_III(L, J_xy, Gamma, S)
    alg = hilbert.spin_algebra(S)
    q = hilbert.total_charge(L, alg).values
    perm = hilbert.basis_translation((np.arange(L) + 1) % L, alg.dim)
    H = gen.matrix
    out = {}
    charges = hilbert.charge_sectors(hilbert.ChargeOperator(q)) if charge is None else [charge]
    for N in charges:
        idx = hilbert.sector_basis(hilbert.ChargeOperator(q), N)
        for m in range(L):
            U = momentum_basis(idx, perm, L, m)
            if U.shape[1] == 0:
                continue
            A = (U.getH() @ H[idx][:, idx] @ U).toarray()
            out[(int(round(N)), m)] = la.eigvalsh(0.5 * (A + A.conj().T))
    return out


def goldstone_variational_energy(L: int, S, N: int, k: float, J_xy: float, Gamma: float) -> float:
    """``<k|H_eff|k>`` for one extra magnon of momentum ``k`` on ``|I^{N-1}>``.

    In configuration space the state is ``sum_r exp(i k r) n_r(c)``: the
    superoperator ``b_r^dag (.) b_r`` weighs each target configuration by its
    occupation ``n_r``. ``N`` is the total charge ``sum_i (S^z_i + S)``.
    """
    alg = hilbert.spin_algebra(S)
    m = k * L / (2 * np.pi)
    if abs(m - round(m)) > 1e-9:
        raise ValueError(f"k={k} is not on the {L}-site momentum grid")
    if not 1 <= N <= L * (alg.dim - 1):
        raise ValueError("N out of range")
    H = effective_heisenberg_III(L, J_xy, Gamma, S).matrix
    q = hilbert.total_charge(L, alg)
    idx = hilbert.sector_basis(q, N)
    occ = alg.charge[hilbert.site_digits(L, alg.dim)[idx]]
    v = occ @ np.exp(1j * k * np.arange(L))
    v = v / np.linalg.norm(v)
    Hs = H[idx][:, idx]
    return float(np.real(v.conj() @ (Hs @ v)))


@dataclass
class SecondOrderReport:
    rows: list  # (N, k, exact, effective, abs_dev, rel_dev)

    @property
    def max_abs(self) -> float:
        return max(r[4] for r in self.rows)

    def max_rel(self, k_nonzero: bool = True) -> float:
        vals = [r[5] for r in self.rows if (r[1] != 0 or not k_nonzero) and np.isfinite(r[5])]
        return max(vals) if vals else float("nan")

    def at_k(self, k: float) -> list:
        return [r for r in self.rows if abs(r[1] - k) < 1e-9]


def validate_III_second_order(L: int, J_xy: float, Gamma: float, S=0.5, J_z: float = 0.0,
                              sectors=None) -> SecondOrderReport:
    """Slowest exact eigenvalue per (N, N) sector and momentum vs ``-min H_eff``.

    ``sectors`` restricts the charges checked; the empty and full sectors
    are skipped since they carry a single configuration.
    """
    spec = model_III(L, S, J_xy, J_z, Gamma)
    alg = hilbert.spin_algebra(S)
    nmax = L * (alg.dim - 1)
    sectors = range(1, nmax) if sectors is None else sectors
    eff = effective_momentum_spectrum(L, J_xy, Gamma, S)
    rows = []
    for N in sectors:
        blocks, _, _, order = momentum_blocks(spec, (N, N))
        for m in range(order):
            if (N, m) not in eff:
                continue
            vals = la.eigvals(blocks[m])
            exact = float(np.max(vals.real))
            pred = -float(eff[(N, m)][0])
            k = 2 * np.pi * m / order
            k = k - 2 * np.pi if k > np.pi + 1e-12 else k
            dev = abs(exact - pred)
            rel = dev / abs(pred) if abs(pred) > 1e-12 else (0.0 if dev < 1e-12 else np.inf)
            rows.append((N, k, exact, pred, dev, rel))
    return SecondOrderReport(rows)
