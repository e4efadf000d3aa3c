"""Lindblad generators, the model zoo, symmetry classes and sector blocks.

The generator convention keeps the factor of two on the jump term::

    L[rho] = -i[H, rho] + sum_mu g_mu (2 L rho L^dag - {L^dag L, rho})

Density matrices are vectorized row-major: doubled-space index
``r = j * D + k`` holds ``rho[j, k]`` (left index ``j``, right index ``k``
fastest), so ``vec(A rho B) = kron(A, B.T) vec(rho)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import hilbert
from .hilbert import ChargeOperator, LocalAlgebra, embed
from .lattice import Lattice, b_plane_wave

STRONG, WEAK, NONE = "strong", "weak", "none"


class DimensionMismatchError(ValueError):
    pass


class SymmetryError(ValueError):
    pass


@dataclass(frozen=True)
class LindbladSpec:
    hamiltonian: sp.csr_matrix
    jumps: tuple  # ((rate, operator), ...)
    charge: ChargeOperator | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    n_sites: int | None = None
    local_dim: int | None = None
    # site permutation generating the translation group, if any
    site_translation: np.ndarray | None = None
    lattice: Lattice | None = None

    def __post_init__(self):
        H = sp.csr_matrix(self.hamiltonian, dtype=complex)
        object.__setattr__(self, "hamiltonian", H)
        D = H.shape[0]
        if H.shape != (D, D):
            raise DimensionMismatchError("Hamiltonian must be square")
        jumps = []
        for rate, op in self.jumps:
            if rate < 0:
                raise ValueError(f"negative rate {rate}")
            op = sp.csr_matrix(op, dtype=complex)
            if op.shape != (D, D):
                raise DimensionMismatchError(f"jump operator shape {op.shape} does not match H {H.shape}")
            jumps.append((float(rate), op))
        object.__setattr__(self, "jumps", tuple(jumps))
        herm = abs(H - H.getH()).max() if H.nnz else 0.0
        scale = abs(H).max() if H.nnz else 0.0
        if herm > 1e-12 * max(scale, 1.0):
            raise ValueError("Hamiltonian is not Hermitian")
        if self.charge is not None and self.charge.dim != D:
            raise DimensionMismatchError("charge operator dimension mismatch")

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


@dataclass(frozen=True)
class Superoperator:
    matrix: sp.csr_matrix
    dim: int  # physical Hilbert dimension D; matrix is D^2 x D^2
    charge: np.ndarray | None = None

    def pair(self, r: int) -> tuple[int, int]:
        return divmod(int(r), self.dim)

    @property
    def n_left(self) -> np.ndarray:
        return np.repeat(self.charge, self.dim)

    @property
    def n_right(self) -> np.ndarray:
        return np.tile(self.charge, self.dim)

    @property
    def scale(self) -> float:
        return float(abs(self.matrix).sum(axis=1).max()) if self.matrix.nnz else 0.0


@dataclass(frozen=True)
class SectorBlock:
    label: object  # (N_L, N_R) or N_L - N_R
    indices: np.ndarray  # doubled-space indices, r = j * D + k
    matrix: sp.csr_matrix
    dim: int  # physical dimension D

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def is_diagonal(self) -> bool:
        if isinstance(self.label, tuple):
            return self.label[0] == self.label[1]
        return self.label == 0

    def to_operator(self, vec) -> np.ndarray:
        """Embed a block vector back into a ``D x D`` matrix."""
        full = np.zeros(self.dim * self.dim, dtype=complex)
        full[self.indices] = vec
        return full.reshape(self.dim, self.dim)

    def from_operator(self, rho) -> np.ndarray:
        return np.asarray(rho).reshape(-1)[self.indices]


# --------------------------------------------------------------------------
# superoperator assembly


def _dissipator_terms(op: sp.csr_matrix):
    ldl = (op.getH() @ op).tocsr()
    return ldl


def vectorize(spec: LindbladSpec) -> Superoperator:
    """Sparse ``D^2 x D^2`` matrix of the generator."""
    H = spec.hamiltonian
    D = spec.dim
    eye = sp.identity(D, dtype=complex, format="csr")
    M = -1j * (sp.kron(H, eye) - sp.kron(eye, H.T))
    for rate, op in spec.jumps:
        if rate == 0:
            continue
        ldl = _dissipator_terms(op)
        M = M + rate * (2 * sp.kron(op, op.conj()) - sp.kron(ldl, eye) - sp.kron(eye, ldl.T))
    charge = None if spec.charge is None else spec.charge.values
    return Superoperator(sp.csr_matrix(M), D, charge)


def apply_liouvillian(spec: LindbladSpec, rho):
    """``L[rho]`` without forming the superoperator (dense or sparse ``rho``)."""
    H = spec.hamiltonian
    out = -1j * (H @ rho - rho @ H)
    for rate, op in spec.jumps:
        if rate == 0:
            continue
        ldl = _dissipator_terms(op)
        out = out + rate * (2 * (op @ rho @ op.getH()) - ldl @ rho - rho @ ldl)
    return out


# --------------------------------------------------------------------------
# models


def _spin_half_ops(n: int):
    alg = hilbert.spin_algebra(0.5)
    sp_ = [embed(alg.raising, i, n, alg) for i in range(n)]
    sm_ = [embed(alg.lowering, i, n, alg) for i in range(n)]
    sz_ = [embed(2 * alg.diag, i, n, alg) for i in range(n)]
    return alg, sp_, sm_, sz_


def _xxz_bonds(bonds, sp_, sm_, sz_, J, Jz, dim):
    H = sp.csr_matrix((dim, dim), dtype=complex)
    for i, j in bonds:
        H = H + J * (sp_[i] @ sm_[j] + sm_[i] @ sp_[j])
        if Jz:
            H = H + Jz * (sz_[i] @ sz_[j])
    return H


def _check_rates(**rates):
    for k, v in rates.items():
        if v < 0:
            raise ValueError(f"rate {k} must be nonnegative, got {v}")


def _unit_cell_translation(lattice: Lattice) -> np.ndarray:
    # shift by two along the first axis keeps the A/B pattern
    shift = [0] * lattice.d
    shift[0] = 2 if lattice.d == 1 else 1
    if lattice.d > 1:
        shift[1] = 1
    return lattice.translation(shift)


def model_I(lattice: Lattice, J: float, Jz: float, Gamma: float) -> LindbladSpec:
    """XXZ bonds with loss on A and gain on B (weak U(1))."""
    _check_rates(Gamma=Gamma)
    n = lattice.site_count
    alg, sp_, sm_, sz_ = _spin_half_ops(n)
    H = _xxz_bonds(lattice.bonds(), sp_, sm_, sz_, J, Jz, 2**n)
    jumps = [(Gamma, sm_[i] if lattice.is_A(i) else sp_[i]) for i in range(n)]
    return LindbladSpec(
        H, tuple(jumps), hilbert.total_charge(n, alg), "I",
        dict(J=J, Jz=Jz, Gamma=Gamma), n, 2, _unit_cell_translation(lattice), lattice,
    )


def model_II(lattice: Lattice, J: float, Jz: float, Gamma: float, Gamma_z: float = 0.0) -> LindbladSpec:
    """XXZ bonds with incoherent A -> B hopping and dephasing (strong U(1))."""
    _check_rates(Gamma=Gamma, Gamma_z=Gamma_z)
    n = lattice.site_count
    alg, sp_, sm_, sz_ = _spin_half_ops(n)
    H = _xxz_bonds(lattice.bonds(), sp_, sm_, sz_, J, Jz, 2**n)
    jumps = [(Gamma, sp_[b] @ sm_[a]) for a, b in lattice.ab_bonds()]
    if Gamma_z:
        jumps += [(Gamma_z, sz_[i]) for i in range(n)]
    return LindbladSpec(
        H, tuple(jumps), hilbert.total_charge(n, alg), "II",
        dict(J=J, Jz=Jz, Gamma=Gamma, Gamma_z=Gamma_z), n, 2, _unit_cell_translation(lattice), lattice,
    )


def model_III(L: int, S, J_xy: float, Jz: float, Gamma: float) -> LindbladSpec:
    """Periodic spin-S XXZ chain with on-site S^z dephasing."""
    _check_rates(Gamma=Gamma)
    if int(L) < 2:
        raise ValueError("model III needs L >= 2")
    L = int(L)
    alg = hilbert.spin_algebra(S)
    d = alg.dim
    splus = [embed(alg.raising, i, L, alg) for i in range(L)]
    sminus = [embed(alg.lowering, i, L, alg) for i in range(L)]
    sz = [embed(alg.diag, i, L, alg) for i in range(L)]
    H = sp.csr_matrix((d**L, d**L), dtype=complex)
    for i in range(L):
        j = (i + 1) % L
        H = H + (J_xy / 2) * (splus[i] @ sminus[j] + sminus[i] @ splus[j])
        if Jz:
            H = H + Jz * (sz[i] @ sz[j])
    jumps = tuple((Gamma, sz[i]) for i in range(L))
    return LindbladSpec(
        H, jumps, hilbert.total_charge(L, alg), "III",
        dict(J_xy=J_xy, Jz=Jz, Gamma=Gamma, S=float(S), L=L), L, d, (np.arange(L) + 1) % L,
    )


def _boson_ops(n: int, n_max: int):
    alg = hilbert.boson_algebra(n_max)
    bd = [embed(alg.raising, i, n, alg) for i in range(n)]
    b = [embed(alg.lowering, i, n, alg) for i in range(n)]
    num = [embed(alg.diag, i, n, alg) for i in range(n)]
    return alg, bd, b, num


def model_eff_n0(lattice: Lattice, J: float, Gamma: float, n_max: int = 3, Gamma_z: float = 0.0) -> LindbladSpec:
    """Soft-core bosons near the empty state: hopping plus incoherent A -> B moves.

    ``Gamma_z`` adds the boson image ``2 n_i - 1`` of sigma^z dephasing.
    """
    _check_rates(Gamma=Gamma, Gamma_z=Gamma_z)
    n = lattice.site_count
    alg, bd, b, num = _boson_ops(n, n_max)
    dim = alg.dim**n
    H = sp.csr_matrix((dim, dim), dtype=complex)
    for i, j in lattice.bonds():
        H = H + J * (bd[i] @ b[j] + bd[j] @ b[i])
    jumps = [(Gamma, bd[bb] @ b[a]) for a, bb in lattice.ab_bonds()]
    if Gamma_z:
        eye = sp.identity(dim, dtype=complex, format="csr")
        jumps += [(Gamma_z, 2 * num[i] - eye) for i in range(n)]
    return LindbladSpec(
        H, tuple(jumps), hilbert.total_charge(n, alg), "eff-n0",
        dict(J=J, Gamma=Gamma, n_max=n_max, Gamma_z=Gamma_z), n, alg.dim,
        _unit_cell_translation(lattice), lattice,
    )


def single_boson_state(lattice: Lattice, amplitudes, n_max: int = 3) -> np.ndarray:
    """Normalized ket ``sum_i psi_i b_i^dagger |0>`` in the truncated boson space."""
    psi = np.asarray(amplitudes, dtype=complex)
    n = lattice.site_count
    if psi.shape != (n,):
        raise DimensionMismatchError(f"need {n} amplitudes, got {psi.shape}")
    if np.linalg.norm(psi) == 0:
        raise ValueError("amplitudes vanish")
    dim = int(n_max) + 1
    ket = np.zeros(dim**n, dtype=complex)
    ket[dim ** (n - 1 - np.arange(n))] = psi
    return ket / np.linalg.norm(ket)


def bose_surface_state(lattice: Lattice, k, n_max: int = 3) -> np.ndarray:
    """One boson in the B-sublattice plane wave of momentum ``k``.

    On a lattice whose B grid does not carry ``k`` the phases are still
    assigned from the B coordinates, so the state is not periodic there.
    """
    return single_boson_state(lattice, b_plane_wave(lattice, k), n_max)


def _pure_generator(spec: LindbladSpec, ket):
    ket = sp.csr_matrix(np.asarray(ket, dtype=complex).reshape(-1, 1))
    return ket, apply_liouvillian(spec, ket @ ket.getH())


def pure_state_residual(spec: LindbladSpec, ket) -> float:
    """Largest entry of ``|L[|psi><psi|]|`` (sparse, so large spaces are cheap)."""
    _, out = _pure_generator(spec, ket)
    return float(abs(out).max()) if out.nnz else 0.0


def pure_state_decay_rate(spec: LindbladSpec, ket) -> float:
    """``-d/dt <psi|rho|psi>`` at ``rho = |psi><psi|``; zero for a steady dark state."""
    ket, out = _pure_generator(spec, ket)
    return float(-np.real((ket.getH() @ out @ ket).toarray()[0, 0]))


def model_eff_nhalf(lattice: Lattice, J: float, Gamma: float, n_max: int = 3) -> LindbladSpec:
    """Bosons near half filling: pair creation and pair loss on bonds.

    The conserved charge is the staggered number ``sum_A n - sum_B n``.
    """
    _check_rates(Gamma=Gamma)
    n = lattice.site_count
    alg, bd, b, num = _boson_ops(n, n_max)
    dim = alg.dim**n
    H = sp.csr_matrix((dim, dim), dtype=complex)
    for i, j in lattice.bonds():
        H = H + J * (bd[i] @ bd[j] + b[j] @ b[i])
    jumps = [(Gamma, b[i] @ b[j]) for i, j in lattice.bonds()]
    weights = [1.0 if lattice.is_A(i) else -1.0 for i in range(n)]
    return LindbladSpec(
        H, tuple(jumps), hilbert.total_charge(n, alg, weights), "eff-nhalf",
        dict(J=J, Gamma=Gamma, n_max=n_max), n, alg.dim, _unit_cell_translation(lattice), lattice,
    )


def add_chemical_shift(spec: LindbladSpec, mu: float) -> LindbladSpec:
    """``H -> H + mu N``, i.e. ``L -> L - i mu [N, .]``."""
    if spec.charge is None:
        raise ValueError("spec has no charge operator")
    params = dict(spec.params, mu=mu)
    return replace(spec, hamiltonian=spec.hamiltonian + mu * spec.charge.op, params=params)


# --------------------------------------------------------------------------
# symmetry


def _commutator_norm(M: sp.csr_matrix, q: np.ndarray) -> float:
    """Frobenius norm of ``[M, diag(q)]`` for sparse ``M``."""
    coo = M.tocoo()
    return float(np.sqrt(np.sum(np.abs(coo.data) ** 2 * (q[coo.row] - q[coo.col]) ** 2)))


def classify(superop: Superoperator, tol: float = 1e-10) -> str:
    if superop.charge is None:
        raise ValueError("superoperator carries no charge")
    scale = max(superop.scale, 1.0)
    nl, nr = superop.n_left, superop.n_right
    if _commutator_norm(superop.matrix, nl) <= tol * scale and _commutator_norm(superop.matrix, nr) <= tol * scale:
        return STRONG
    if _commutator_norm(superop.matrix, nl - nr) <= tol * scale:
        return WEAK
    return NONE


def symmetry_check(spec: LindbladSpec, charge: ChargeOperator | None = None) -> str:
    """Classify the U(1) generated by ``charge`` as strong, weak or none."""
    charge = charge if charge is not None else spec.charge
    if charge is None:
        raise ValueError("no charge operator given")
    sup = vectorize(replace(spec, charge=charge))
    return classify(sup)


def _labels(superop: Superoperator, mode: str) -> np.ndarray:
    nl = np.rint(superop.n_left).astype(int)
    nr = np.rint(superop.n_right).astype(int)
    if mode == "pair":
        return nl * (int(nr.max()) - int(nr.min()) + 1) + (nr - nr.min()), nl, nr
    if mode == "difference":
        return nl - nr, nl, nr
    raise ValueError(f"unknown mode {mode!r}")


def sector_decompose(superop: Superoperator, mode: str = "pair") -> list[SectorBlock]:
    """Split the generator into charge sectors.

    ``mode="pair"`` labels blocks ``(N_L, N_R)`` and requires a strong
    symmetry; ``mode="difference"`` labels them by ``N_L - N_R``.
    """
    cls = classify(superop)
    if mode == "pair" and cls != STRONG:
        raise SymmetryError(f"pair sectors need a strong symmetry, generator is {cls}")
    if mode == "difference" and cls == NONE:
        raise SymmetryError("generator has no U(1) symmetry")
    keys, nl, nr = _labels(superop, mode)
    M = superop.matrix
    blocks = []
    for key in np.unique(keys):
        idx = np.flatnonzero(keys == key)
        label = (int(nl[idx[0]]), int(nr[idx[0]])) if mode == "pair" else int(key)
        blocks.append(SectorBlock(label, idx, M[idx][:, idx].tocsr(), superop.dim))
    return blocks


def offblock_residual(superop: Superoperator, mode: str = "pair") -> float:
    """Largest matrix element connecting two different sectors."""
    keys, _, _ = _labels(superop, mode)
    coo = superop.matrix.tocoo()
    off = keys[coo.row] != keys[coo.col]
    return float(np.abs(coo.data[off]).max()) if off.any() else 0.0


def restrict(op: sp.csr_matrix, rows, cols=None) -> sp.csr_matrix:
    cols = rows if cols is None else cols
    return op[rows][:, cols].tocsr()


def sector_block(spec: LindbladSpec, label) -> SectorBlock:
    """Build one sector block directly.

    For a strongly symmetric spec and ``label=(N_L, N_R)`` the block is
    assembled from operators restricted to the two charge sectors, never
    forming the full superoperator. Integer labels (``N_L - N_R``) are sliced
    from the full generator.
    """
    D = spec.dim
    if isinstance(label, tuple):
        if spec.charge is None or not _ops_conserve(spec):
            raise SymmetryError("pair sectors need a strong symmetry")
        a = hilbert.sector_basis(spec.charge, label[0])
        b = hilbert.sector_basis(spec.charge, label[1])
        idx = (a[:, None] * D + b[None, :]).reshape(-1)
        if len(idx) == 0:
            return SectorBlock(label, idx, sp.csr_matrix((0, 0), dtype=complex), D)
        Ha, Hb = restrict(spec.hamiltonian, a), restrict(spec.hamiltonian, b)
        Ia = sp.identity(len(a), dtype=complex, format="csr")
        Ib = sp.identity(len(b), dtype=complex, format="csr")
        M = -1j * (sp.kron(Ha, Ib) - sp.kron(Ia, Hb.T))
        for rate, op in spec.jumps:
            if rate == 0:
                continue
            ldl = _dissipator_terms(op)
            M = M + rate * (
                2 * sp.kron(restrict(op, a), restrict(op, b).conj())
                - sp.kron(restrict(ldl, a), Ib)
                - sp.kron(Ia, restrict(ldl, b).T)
            )
        return SectorBlock(label, idx, sp.csr_matrix(M), D)
    sup = vectorize(spec)
    keys, _, _ = _labels(sup, "difference")
    idx = np.flatnonzero(keys == int(label))
    return SectorBlock(int(label), idx, sup.matrix[idx][:, idx].tocsr(), D)


def _ops_conserve(spec: LindbladSpec, tol: float = 1e-10) -> bool:
    """Cheap strong-symmetry test: every operator is block diagonal in charge."""
    q = spec.charge.values
    ops = [spec.hamiltonian] + [op for _, op in spec.jumps]
    for op in ops:
        coo = op.tocoo()
        if coo.nnz and np.abs(coo.data[np.abs(q[coo.row] - q[coo.col]) > 1e-9]).sum() > tol:
            return False
    return True
