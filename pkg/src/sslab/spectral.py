"""Liouvillian spectra, steady states, time evolution and dispersions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import hilbert
from .lindblad import LindbladSpec, SectorBlock, sector_block, vectorize

DENSE_MAX = 2048
ZERO_TOL = 1e-9


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual=np.inf):
        super().__init__(f"{message} (best residual {residual:.3e})")
        self.residual = residual


class StepSizeError(RuntimeError):
    pass


class SymmetryRequiredError(ValueError):
    pass


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray  # sorted by descending real part
    eigenvectors: np.ndarray  # columns, block basis
    steady_states: list  # D x D operators
    gap: float
    label: object = None
    residual: float = 0.0

    @property
    def kernel_dim(self) -> int:
        return len(self.steady_states)


def _matrix_scale(M) -> float:
    if sp.issparse(M):
        return float(abs(M).sum(axis=1).max()) if M.nnz else 0.0
    return float(np.abs(M).sum(axis=1).max()) if M.size else 0.0


def _sort(vals, vecs):
    order = np.lexsort((-vals.imag, -vals.real))
    return vals[order], vecs[:, order]


def _eig(M, count, sigma=None, maxiter=None):
    n = M.shape[0]
    if n <= DENSE_MAX or count is None or count >= n - 1:
        A = M.toarray() if sp.issparse(M) else np.asarray(M)
        vals, vecs = la.eig(A)
        return vals, vecs
    scale = max(_matrix_scale(M), 1.0)
    sigma = 1e-3 * scale if sigma is None else sigma
    try:
        vals, vecs = spla.eigs(sp.csc_matrix(M), k=count, sigma=sigma, which="LM", maxiter=maxiter or 50 * n)
    except spla.ArpackNoConvergence as err:
        res = np.inf
        if len(err.eigenvalues):
            res = float(np.max(np.linalg.norm(M @ err.eigenvectors - err.eigenvectors * err.eigenvalues, axis=0)))
        raise ConvergenceError("shift-invert Arnoldi did not converge", res) from err
    return vals, vecs


def _hermitian_kernel(ops: list[np.ndarray]) -> list[np.ndarray]:
    """Hermitian, trace-orthogonal representatives spanning the same kernel."""
    if not ops:
        return []
    D = ops[0].shape[0]
    cand = []
    for X in ops:
        cand += [X + X.conj().T, 1j * (X - X.conj().T)]
    A = np.array([c.reshape(-1) for c in cand]).T
    # real span of Hermitian candidates: orthonormalize the real embedding
    R = np.vstack([A.real, A.imag])
    u, s, vt = np.linalg.svd(R, full_matrices=False)
    rank = len(ops)
    basis = []
    for i in range(rank):
        v = u[:, i]
        H = (v[: D * D] + 1j * v[D * D:]).reshape(D, D)
        basis.append(0.5 * (H + H.conj().T))
    # push all trace into the first element, keep the rest traceless
    tr = np.array([np.trace(b).real for b in basis])
    if np.abs(tr).max() > 1e-10:
        i0 = int(np.argmax(np.abs(tr)))
        basis[0], basis[i0] = basis[i0], basis[0]
        tr[0], tr[i0] = tr[i0], tr[0]
        for i in range(1, rank):
            basis[i] = basis[i] - tr[i] / tr[0] * basis[0]
        basis[0] = basis[0] / tr[0]
    return basis


def spectrum(block: SectorBlock, count: int | None = None, sigma=None) -> SpectrumResult:
    """Rightmost eigenvalues of a sector block.

    ``count=None`` returns the full spectrum (dense). Blocks above
    ``DENSE_MAX`` use shift-invert Arnoldi around a small positive shift.
    """
    n = block.size
    if n == 0:
        return SpectrumResult(np.zeros(0, complex), np.zeros((0, 0), complex), [], float("nan"), block.label)
    M = block.matrix
    vals, vecs = _eig(M, count, sigma)
    vals, vecs = _sort(vals, vecs)
    if count is not None:
        vals, vecs = vals[:count], vecs[:, :count]
    scale = max(_matrix_scale(M), 1.0)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    resid = float(np.max(np.linalg.norm(M @ vecs - vecs * vals, axis=0))) if len(vals) else 0.0
    if resid > 1e-8 * scale:
        raise ConvergenceError("eigenpair residual too large", resid)
    zero = np.abs(vals) <= ZERO_TOL * scale
    kernel = [block.to_operator(vecs[:, i]) for i in np.flatnonzero(zero)]
    if block.is_diagonal:
        steady = _hermitian_kernel(kernel)
    else:
        steady = [K / np.linalg.norm(K) for K in kernel]
    rest = vals[~zero]
    if zero.any():
        gap = float(abs(rest[0].real)) if len(rest) else float("nan")
    else:
        gap = float(abs(vals[0].real))
    return SpectrumResult(vals, vecs, steady, gap, block.label, resid)


def gap_in_sector(spec: LindbladSpec, label, count: int | None = None) -> float:
    """``|Re lambda_1|`` in one sector (``|Re lambda_0|`` without a zero mode)."""
    block = sector_block(spec, label)
    if block.size == 0:
        return float("nan")
    if count is None and block.size > DENSE_MAX:
        count = 8
    return spectrum(block, count).gap


def steady_states(spec: LindbladSpec, label=None) -> list[np.ndarray]:
    """Steady-state representatives, optionally restricted to one sector."""
    if label is None:
        sup = vectorize(spec)
        block = SectorBlock(0, np.arange(spec.dim**2), sup.matrix, spec.dim)
    else:
        block = sector_block(spec, label)
    return spectrum(block).steady_states


# --------------------------------------------------------------------------
# time evolution


@dataclass
class Trajectory:
    times: np.ndarray
    step: float
    states: list | None = None
    observables: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.observables[name]


def evolve(rho0, spec: LindbladSpec, T: float, dt: float, observables: dict | None = None,
           stride: int = 1, store_states: bool = True, check_stability: bool = True) -> Trajectory:
    """Fixed-step RK4 integration of ``d rho/dt = L[rho]``.

    ``observables`` maps names to operators ``O``; ``tr(O rho(t))`` is
    recorded at every ``stride``-th step.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    D = spec.dim
    if rho0.shape != (D, D):
        raise ValueError(f"initial state has shape {rho0.shape}, expected {(D, D)}")
    if np.abs(rho0 - rho0.conj().T).max() > 1e-10:
        raise ValueError("initial state is not Hermitian")
    tr0 = np.trace(rho0)
    if abs(tr0 - 1) > 1e-10:
        raise ValueError("initial state must have unit trace")
    M = vectorize(spec).matrix
    norm = _matrix_scale(M)
    if check_stability and dt * norm > 0.1:
        raise StepSizeError(f"dt * ||L|| = {dt * norm:.3g} exceeds 0.1; reduce dt")
    nsteps = int(round(T / dt))
    if nsteps < 1 or not np.isclose(nsteps * dt, T, rtol=1e-9, atol=1e-12):
        raise ValueError("T must be a positive integer multiple of dt")
    obs = {k: sp.csr_matrix(v, dtype=complex) for k, v in (observables or {}).items()}
    # tr(O rho) = sum_jk O_kj rho_jk = vec(O^T) . vec(rho)
    obs_rows = {k: np.asarray(O.T.toarray()).reshape(-1) for k, O in obs.items()}
    v = rho0.reshape(-1).copy()
    times, states, records = [], [], {k: [] for k in obs}

    def record(t, v):
        times.append(t)
        if store_states:
            states.append(v.reshape(D, D).copy())
        for k, row in obs_rows.items():
            records[k].append(row @ v)

    record(0.0, v)
    for n in range(1, nsteps + 1):
        k1 = M @ v
        k2 = M @ (v + 0.5 * dt * k1)
        k3 = M @ (v + 0.5 * dt * k2)
        k4 = M @ (v + dt * k3)
        v = v + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if n % stride == 0 or n == nsteps:
            drift = abs(v.reshape(D, D).trace() - tr0)
            if drift > 1e-6:
                raise StepSizeError(f"trace drift {drift:.3e} at t={n * dt:.4g}")
            record(n * dt, v)
    return Trajectory(
        np.array(times), dt, states if store_states else None,
        {k: np.array(r) for k, r in records.items()},
    )


def detect_oscillation(traj: Trajectory, observable, signed: bool = False, pad: int = 16) -> float:
    """Dominant angular frequency of ``<observable>(t)``.

    ``observable`` is a recorded name or an operator evaluated on the stored
    states. The magnitude is returned unless ``signed``, in which case the
    sign follows ``exp(-i omega t)``. Static signals give 0.
    """
    if isinstance(observable, str):
        sig = np.asarray(traj.observables[observable], dtype=complex)
    else:
        if traj.states is None:
            raise ValueError("trajectory has no stored states")
        O = np.asarray(observable.toarray() if sp.issparse(observable) else observable)
        sig = np.array([np.trace(O @ r) for r in traj.states])
    t = np.asarray(traj.times)
    if len(t) < 4:
        raise ValueError("trajectory too short")
    dt = float(np.median(np.diff(t)))
    x = sig - sig.mean()
    if np.abs(x).max() <= 1e-10 * max(1.0, np.abs(sig).max()):
        return 0.0
    n = pad * len(x)
    spec_ = np.abs(np.fft.fft(x, n))
    f = np.fft.fftfreq(n, d=dt)
    peak = f[int(np.argmax(spec_))]
    omega = -2 * np.pi * peak
    return float(omega if signed else abs(omega))


# --------------------------------------------------------------------------
# momentum resolution


def _perm_order(perm: np.ndarray) -> int:
    p = np.arange(len(perm))
    for n in range(1, len(perm) + 1):
        p = perm[p]
        if np.array_equal(p, np.arange(len(perm))):
            return n
    raise ValueError("not a permutation")


def momentum_basis(indices: np.ndarray, doubled_perm: np.ndarray, order: int, m: int) -> sp.csr_matrix:
    """Orthonormal columns spanning momentum ``2 pi m / order`` within ``indices``.

    Column for orbit rep ``r``: ``sum_s exp(-i k s) T^s |r> / sqrt(len)``,
    so that ``T`` acts on it with eigenvalue ``exp(i k)``.
    """
    pos = {int(r): i for i, r in enumerate(indices)}
    seen = np.zeros(len(indices), bool)
    k = 2 * np.pi * m / order
    rows, cols, vals = [], [], []
    col = 0
    for i, r in enumerate(indices):
        if seen[i]:
            continue
        orbit = [int(r)]
        nxt = int(doubled_perm[r])
        while nxt != orbit[0]:
            orbit.append(nxt)
            nxt = int(doubled_perm[nxt])
        for o in orbit:
            seen[pos[o]] = True
        ell = len(orbit)
        # exp(i k ell) must be 1 for the orbit to carry momentum k
        if (m * ell) % order:
            continue
        for s, o in enumerate(orbit):
            rows.append(pos[o])
            cols.append(col)
            vals.append(np.exp(-1j * k * s) / np.sqrt(ell))
        col += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(indices), col))


def doubled_translation(spec: LindbladSpec) -> tuple[np.ndarray, int]:
    if spec.site_translation is None:
        raise SymmetryRequiredError("spec is not translation invariant")
    p = hilbert.basis_translation(spec.site_translation, spec.local_dim)
    D = spec.dim
    j, k = np.divmod(np.arange(D * D), D)
    return p[j] * D + p[k], _perm_order(np.asarray(spec.site_translation))


def momentum_blocks(spec: LindbladSpec, sector):
    """Dense generator restricted to every momentum ``2 pi m / order``.

    Returns ``(blocks, bases, order)`` with ``bases[m]`` the sparse columns
    mapping momentum coordinates back to the sector block.
    """
    block = sector_block(spec, sector)
    perm, order = doubled_translation(spec)
    M = block.matrix
    pos = np.full(spec.dim**2, -1)
    pos[block.indices] = np.arange(block.size)
    tgt = pos[perm[block.indices]]
    if (tgt < 0).any():
        raise SymmetryRequiredError("sector is not closed under translation")
    P = sp.csr_matrix((np.ones(block.size), (tgt, np.arange(block.size))), shape=(block.size,) * 2)
    comm = P @ M - M @ P
    if comm.nnz and abs(comm).max() > 1e-10:
        raise SymmetryRequiredError("generator does not commute with the translation")
    blocks, bases = {}, {}
    for m in range(order):
        U = momentum_basis(block.indices, perm, order, m)
        bases[m] = U
        blocks[m] = (U.getH() @ M @ U).toarray() if U.shape[1] else np.zeros((0, 0), complex)
    return blocks, bases, block, order


def _site_charges(spec: LindbladSpec) -> np.ndarray:
    """Per-site charge of every basis state, shape ``(D, n_sites)``.

    Assumes the charge is the unweighted sum of identical local charges.
    """
    n, d = spec.n_sites, spec.local_dim
    digits = hilbert.site_digits(n, d)
    q = spec.charge.values
    c0 = q[0] / n
    level = np.array([q[l * d ** (n - 1)] - (n - 1) * c0 for l in range(d)])
    return level[digits]


def density_wave(spec: LindbladSpec, sector, k: float) -> np.ndarray:
    """``sum_j exp(-i k j) n_j`` projected on the diagonal sector, as a D x D matrix."""
    if not (isinstance(sector, tuple) and sector[0] == sector[1]):
        raise ValueError("density waves live in diagonal sectors")
    charges = _site_charges(spec)
    # sites ordered along the translation cycle starting at site 0
    perm = np.asarray(spec.site_translation)
    cycle = [0]
    while perm[cycle[-1]] != 0:
        cycle.append(int(perm[cycle[-1]]))
    phase = np.zeros(spec.n_sites, complex)
    phase[cycle] = np.exp(-1j * k * np.arange(len(cycle)))
    diag = charges @ phase
    diag[np.abs(spec.charge.values - sector[0]) > 1e-9] = 0
    return np.diag(diag)


def dispersion(spec: LindbladSpec, sector, momenta=None, branch: str = "slowest") -> list[tuple[float, complex]]:
    """Momentum-resolved eigenvalues of a sector.

    ``branch="slowest"`` takes the rightmost eigenvalue of each momentum
    block. ``branch="charge"`` takes the eigenmode with the largest overlap
    with the charge density wave at that momentum (the diffusive mode).
    ``momenta`` are angles per unit translation; ``None`` uses every allowed
    ``2 pi m / order``. ``k`` is reported in ``(-pi, pi]``.
    """
    if branch not in ("slowest", "charge"):
        raise ValueError(f"unknown branch {branch!r}")
    blocks, bases, block, order = momentum_blocks(spec, sector)
    if momenta is None:
        ms = list(range(order))
    else:
        ms = []
        for k in momenta:
            m = k * order / (2 * np.pi)
            if abs(m - round(m)) > 1e-9:
                raise ValueError(f"momentum {k} not on the {order}-point grid")
            ms.append(int(round(m)) % order)
    out = []
    for m in ms:
        A = blocks[m]
        k = 2 * np.pi * m / order
        k = k - 2 * np.pi if k > np.pi + 1e-12 else k
        if A.shape[0] == 0:
            out.append((k, complex("nan")))
            continue
        vals, vecs = la.eig(A)
        vals, vecs = _sort(vals, vecs)
        if branch == "slowest":
            out.append((k, complex(vals[0])))
            continue
        w = bases[m].getH() @ block.from_operator(density_wave(spec, sector, 2 * np.pi * m / order))
        if np.linalg.norm(w) < 1e-12:
            raise ValueError("density wave has no weight in this momentum block")
        # expansion coefficients of w in the right eigenbasis
        coef = np.abs(np.linalg.lstsq(vecs, w, rcond=None)[0]) * np.linalg.norm(vecs, axis=0)
        out.append((k, complex(vals[int(np.argmax(coef))])))
    return out
