"""Sublattice mean-field dynamics for models I and II.

Variables are single-site expectations ``<sigma^+>`` and ``<sigma^z>`` on
the two sublattices. A site has ``2 d`` neighbours, all on the other
sublattice, so the uniform equations carry a factor ``z = 2 d``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .lattice import _B_VECTORS, Lattice, b_coordinates, b_momenta, build_chain, build_square, on_bose_surface


class FixedPointError(RuntimeError):
    def __init__(self, message, residual=np.inf):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class MeanFieldState:
    sA_plus: complex
    sB_plus: complex
    sA_z: float
    sB_z: float

    def to_vector(self) -> np.ndarray:
        a, b = complex(self.sA_plus), complex(self.sB_plus)
        return np.array([a.real, a.imag, b.real, b.imag, self.sA_z, self.sB_z], dtype=float)

    @classmethod
    def from_vector(cls, v) -> "MeanFieldState":
        v = np.asarray(v, dtype=float)
        return cls(complex(v[0], v[1]), complex(v[2], v[3]), float(v[4]), float(v[5]))

    @property
    def filling(self) -> float:
        return (self.sA_z + self.sB_z + 2) / 4

    @property
    def phase_difference(self) -> float:
        """``arg(sA_plus) - arg(sB_plus)`` wrapped to ``(-pi, pi]``."""
        d = np.angle(self.sA_plus) - np.angle(self.sB_plus)
        return float(np.angle(np.exp(1j * d)))

    def bloch_ok(self, tol: float = 1e-9) -> bool:
        return all(
            abs(p) ** 2 <= (1 - z**2) / 4 + tol and -1 - tol <= z <= 1 + tol
            for p, z in ((self.sA_plus, self.sA_z), (self.sB_plus, self.sB_z))
        )


@dataclass(frozen=True)
class MFParams:
    J: float
    Gamma: float
    Gamma_z: float = 0.0
    d: int = 1
    n: float | None = None

    def __post_init__(self):
        if min(self.J, self.Gamma, self.Gamma_z) < 0:
            raise ValueError("J, Gamma and Gamma_z must be nonnegative")
        if self.d not in (1, 2, 3):
            raise ValueError("d must be 1, 2 or 3")
        if self.n is not None and not 0 <= self.n <= 1:
            raise ValueError("filling must lie in [0, 1]")

    @property
    def z(self) -> int:
        return 2 * self.d


def _as_state(x) -> MeanFieldState:
    return x if isinstance(x, MeanFieldState) else MeanFieldState.from_vector(x)


def rhs_model_I(state, params: MFParams) -> np.ndarray:
    """Time derivative for loss on A and gain on B, as a 6-vector."""
    s = _as_state(state)
    a, b, za, zb = s.sA_plus, s.sB_plus, s.sA_z, s.sB_z
    J, G, z = params.J, params.Gamma, params.z
    da = -G * a - 1j * J * z * za * b
    db = -G * b - 1j * J * z * zb * a
    dza = -2 * G * (za + 1) + 2j * J * z * (np.conj(a) * b - a * np.conj(b))
    dzb = 2 * G * (1 - zb) + 2j * J * z * (np.conj(b) * a - b * np.conj(a))
    return np.array([da.real, da.imag, db.real, db.imag, dza.real, dzb.real])


def rhs_model_II(state, params: MFParams) -> np.ndarray:
    """Time derivative for incoherent A -> B hopping plus dephasing."""
    s = _as_state(state)
    a, b, za, zb = s.sA_plus, s.sB_plus, s.sA_z, s.sB_z
    J, G, Gz, z = params.J, params.Gamma, params.Gamma_z, params.z
    da = z * (-G / 2 * a * (1 - zb) - 1j * J * za * b) - 4 * Gz * a
    db = z * (-G / 2 * b * (1 + za) - 1j * J * zb * a) - 4 * Gz * b
    flow = 2j * J * (np.conj(a) * b - a * np.conj(b))
    dza = z * (G * (za + 1) * (zb - 1) + flow)
    dzb = z * (G * (1 - zb) * (1 + za) - flow)
    return np.array([da.real, da.imag, db.real, db.imag, dza.real, dzb.real])


def rhs_model_II_sites(plus: np.ndarray, sz: np.ndarray, lattice: Lattice, params: MFParams):
    """Site-resolved model II equations on a finite lattice.

    Returns ``(d plus/dt, d sz/dt)`` for per-site ``<sigma^+>`` and ``<sigma^z>``.
    """
    plus = np.asarray(plus, dtype=complex)
    sz = np.asarray(sz, dtype=float)
    J, G, Gz = params.J, params.Gamma, params.Gamma_z
    dplus = -4 * Gz * plus
    dz = np.zeros_like(sz)
    for i, nbrs in enumerate(lattice.neighbors):
        sign = 1.0 if lattice.is_A(i) else -1.0
        for j in nbrs:
            # A sites feel (1 - z_B), B sites feel (1 + z_A)
            dplus[i] += -G / 2 * plus[i] * (1 - sign * sz[j]) - 1j * J * sz[i] * plus[j]
            flow = 2j * J * (np.conj(plus[i]) * plus[j] - plus[i] * np.conj(plus[j]))
            if sign > 0:
                dz[i] += G * (sz[i] + 1) * (sz[j] - 1) + flow.real
            else:
                dz[i] += G * (1 - sz[i]) * (1 + sz[j]) + flow.real
    return dplus, dz


# --------------------------------------------------------------------------
# integration


@dataclass
class MFTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, 6)

    @property
    def final(self) -> MeanFieldState:
        return MeanFieldState.from_vector(self.states[-1])


def integrate(rhs, init, T: float, dt: float, params: MFParams, stride: int = 1) -> MFTrajectory:
    """Fixed-step RK4 integration of a 6-component mean-field system."""
    if dt <= 0 or T <= 0:
        raise ValueError("T and dt must be positive")
    x = (init.to_vector() if isinstance(init, MeanFieldState) else np.asarray(init, dtype=float)).copy()
    nsteps = int(round(T / dt))
    f = lambda v: rhs(v, params)  # noqa: E731
    times, states = [0.0], [x.copy()]
    for n in range(1, nsteps + 1):
        k1 = f(x)
        k2 = f(x + 0.5 * dt * k1)
        k3 = f(x + 0.5 * dt * k2)
        k4 = f(x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"mean-field integration diverged at t={n * dt:.4g}")
        if n % stride == 0 or n == nsteps:
            times.append(n * dt)
            states.append(x.copy())
    return MFTrajectory(np.array(times), np.array(states))


def residual(rhs, state, params: MFParams) -> float:
    return float(np.linalg.norm(rhs(state, params)))


# --------------------------------------------------------------------------
# fixed points


def fixed_point_model_I(params: MFParams) -> MeanFieldState:
    """Closed-form steady state, gauge fixed so ``sB_plus`` is real positive."""
    G, zJ = params.Gamma, params.J * params.z
    if zJ <= G:
        return MeanFieldState(0j, 0j, -1.0, 1.0)
    r = G / zJ
    b = np.sqrt(0.5 * r * (1 - r))
    return MeanFieldState(1j * b, complex(b), -r, r)


def _particle_hole(s: MeanFieldState) -> MeanFieldState:
    # sigma^+ <-> sigma^-, sigma^z -> -sigma^z, A <-> B
    return MeanFieldState(np.conj(s.sB_plus), np.conj(s.sA_plus), -s.sB_z, -s.sA_z)


def _gauge(s: MeanFieldState) -> MeanFieldState:
    if abs(s.sB_plus) == 0:
        return s
    ph = np.exp(-1j * np.angle(s.sB_plus))
    return MeanFieldState(s.sA_plus * ph, complex(abs(s.sB_plus)), s.sA_z, s.sB_z)


def fixed_point_model_II(params: MFParams, tol: float = 1e-10) -> MeanFieldState:
    """Uniform steady state at filling ``params.n`` (``Gamma_z = 0``).

    Below quarter filling the symmetric state is returned. Between 1/4 and
    1/2 the filling fixes ``sB_z = 4n - 2 - sA_z`` and the remaining scalar
    condition is bracketed on ``sA_z in [-1, 4n - 2]``. Fillings above 1/2 are
    mapped through particle-hole symmetry.
    """
    n = params.n
    if n is None:
        raise ValueError("filling n required")
    if params.Gamma_z:
        raise ValueError("uniform symmetry-broken solution only without dephasing")
    if n > 0.5:
        mirrored = MFParams(params.J, params.Gamma, 0.0, params.d, 1 - n)
        return _gauge(_particle_hole(fixed_point_model_II(mirrored, tol)))
    J, G = params.J, params.Gamma
    if n <= 0.25 or J == 0:
        return MeanFieldState(0j, 0j, -1.0, 4 * n - 1)
    c = 4 * n - 2

    def f(za):
        zb = c - za
        return G**2 * (1 - zb) * (1 + za) + 4 * J**2 * za * zb

    za = brentq(f, -1.0, c, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    zb = c - za
    b = np.sqrt(max(zb * (1 - zb) / 2, 0.0))
    a = -2j * J * za * b / (G * (1 - zb))
    s = MeanFieldState(a, complex(b), za, zb)
    res = residual(rhs_model_II, s, params)
    if res > tol:
        raise FixedPointError("model II fixed point not converged", res)
    return s


def ssb_relations_model_II(s: MeanFieldState, params: MFParams) -> np.ndarray:
    """Residuals of the three algebraic steady-state relations."""
    J, G = params.J, params.Gamma
    return np.array([
        abs(G**2 * (1 - s.sB_z) * (1 + s.sA_z) + 4 * J**2 * s.sA_z * s.sB_z),
        abs(G * (1 - s.sB_z) * s.sA_plus + 2j * J * s.sA_z * s.sB_plus),
        abs(2 * abs(s.sA_plus) ** 2 + s.sA_z * (1 + s.sA_z)),
    ])


# --------------------------------------------------------------------------
# linear stability

FILLING_DIRECTION = np.array([0, 0, 0, 0, 1.0, 1.0]) / np.sqrt(2)


@dataclass
class StabilityResult:
    jacobian: np.ndarray
    eigenvalues: np.ndarray  # all six, descending real part
    reduced: np.ndarray | None  # without the conserved-filling zero mode
    filling_mode: complex | None

    @property
    def leading(self) -> float:
        vals = self.reduced if self.reduced is not None else self.eigenvalues
        return float(vals[0].real)


def jacobian(rhs, state, params: MFParams, h: float = 1e-6) -> np.ndarray:
    x = _as_state(state).to_vector()
    Jm = np.empty((6, 6))
    for k in range(6):
        e = np.zeros(6)
        e[k] = h
        Jm[:, k] = (rhs(x + e, params) - rhs(x - e, params)) / (2 * h)
    return Jm


def _desc(vals):
    return vals[np.lexsort((-vals.imag, -vals.real))]


def stability(rhs, fixed_point, params: MFParams, h: float = 1e-6) -> StabilityResult:
    """Finite-difference Jacobian spectrum at a fixed point.

    For model II the filling ``sA_z + sB_z`` is conserved, so the Jacobian
    maps into its kernel; the restriction to that 5-dimensional subspace is
    reported as ``reduced`` and the removed eigenvalue as ``filling_mode``.
    """
    Jm = jacobian(rhs, fixed_point, params, h)
    vals = _desc(np.linalg.eigvals(Jm))
    if rhs is not rhs_model_II:
        return StabilityResult(Jm, vals, None, None)
    # orthonormal basis of the complement of the filling direction
    q, _ = np.linalg.qr(np.column_stack([FILLING_DIRECTION, np.eye(6)]))
    Q = q[:, 1:6]
    red = _desc(np.linalg.eigvals(Q.T @ Jm @ Q))
    # the filling direction is a left null vector, so its eigenvalue is the trace defect
    filling = complex(np.trace(Jm) - np.sum(red))
    return StabilityResult(Jm, vals, red, filling)


def symmetric_instability_threshold(J: float, Gamma: float, d: int = 2, tol: float = 1e-4,
                                    lo: float = 0.0, hi: float = 0.5, eig_tol: float = 1e-9) -> float:
    """Bisect the filling where the symmetric model II point turns unstable."""

    def unstable(n):
        p = MFParams(J, Gamma, 0.0, d, n)
        s = MeanFieldState(0j, 0j, -1.0, 4 * n - 1)
        return stability(rhs_model_II, s, p).leading > eig_tol

    if unstable(lo) or not unstable(hi):
        raise ValueError("threshold not bracketed")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if unstable(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# Bose-surface family


@dataclass
class BoseFamilyResult:
    k: np.ndarray
    valid: bool  # steady at Gamma_z = 0
    residual: float
    dephasing_residual: float | None  # residual with the requested Gamma_z
    survives_dephasing: bool | None


def _lattice_for(k, d: int) -> Lattice:
    """Smallest periodic lattice whose B grid carries momentum ``k``."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    vecs = _B_VECTORS[d].T.astype(float)
    for side in range(2, 66, 2):
        # a lattice period, written in B Bravais coordinates, must give phase 1
        periods = [np.linalg.solve(vecs, side * e) for e in np.eye(d)]
        if all(abs(np.exp(1j * (p @ k)) - 1) < 1e-12 for p in periods):
            return build_chain(side) if d == 1 else build_square(side, side)
    raise ValueError(f"no periodic lattice up to side 64 carries momentum {k}")


def bose_surface_family(params: MFParams, k, lattice: Lattice | None = None, amplitude: float = 0.2,
                        tol: float = 1e-12) -> BoseFamilyResult:
    """Check a B-sublattice plane-wave order parameter against model II.

    The configuration is ``sigma^z = -1, sigma^+ = 0`` on A and
    ``sigma^+_r = amplitude * exp(i k.r)``, ``sigma^z = 0`` on B. It is a
    steady state exactly when every A site sees a vanishing neighbour sum.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if len(k) != params.d:
        raise ValueError("momentum dimension must match params.d")
    lat = lattice if lattice is not None else _lattice_for(k, params.d)
    if lat.d > 2:
        raise ValueError("Bose-surface check supports d <= 2")
    plus = np.zeros(lat.site_count, dtype=complex)
    plus[lat.b_sites] = amplitude * np.exp(1j * (b_coordinates(lat) @ k))
    sz = np.where([lat.is_A(i) for i in range(lat.site_count)], -1.0, 0.0)
    clean = MFParams(params.J, params.Gamma, 0.0, params.d)
    dp, dz = rhs_model_II_sites(plus, sz, lat, clean)
    res = float(np.sqrt(np.sum(np.abs(dp) ** 2) + np.sum(dz**2)))
    scale = max(params.J, params.Gamma, 1.0) * amplitude
    valid = res <= tol * scale * lat.site_count
    dres = survives = None
    if params.Gamma_z > 0:
        dp, dz = rhs_model_II_sites(plus, sz, lat, params)
        dres = float(np.sqrt(np.sum(np.abs(dp) ** 2) + np.sum(dz**2)))
        survives = dres <= tol * scale * lat.site_count
    return BoseFamilyResult(k, bool(valid), res, dres, survives)


def bose_surface_agreement(params: MFParams, lattice: Lattice) -> bool:
    """True iff the family predicate equals ``on_bose_surface`` on every grid momentum."""
    return all(
        bose_surface_family(params, k, lattice).valid == on_bose_surface(k, tol=1e-9)
        for k in b_momenta(lattice)
    )
