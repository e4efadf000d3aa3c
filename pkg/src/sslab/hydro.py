"""Stochastic field equations for order-parameter phases and conserved charge.

All runs integrate a batch of independent realizations at once with
Euler-Maruyama on a periodic hypercubic grid. Fields have shape
``(realizations, L, ..., L)``. White noise ``<eta eta> = 2 Delta delta(x) delta(t)``
becomes a per-site increment of variance ``2 Delta dt / dx^d``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BLOWUP = 1e6


class InstabilityError(FloatingPointError):
    pass


class NonStationaryError(ValueError):
    pass


@dataclass(frozen=True)
class FieldGrid:
    d: int
    L: int
    dx: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("d must be 1, 2 or 3")
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if self.d == 3 and self.L > 64:
            raise ValueError("3D grids are capped at 64^3")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.L,) * self.d

    @property
    def volume(self) -> int:
        return self.L**self.d

    def momenta(self) -> list[np.ndarray]:
        """Per-axis FFT momenta (radians per lattice spacing)."""
        return [2 * np.pi * np.fft.fftfreq(self.L, d=self.dx)] * self.d

    def khat2(self) -> np.ndarray:
        """Lattice Laplacian symbol ``sum_i (2 - 2 cos k_i dx) / dx^2`` on the FFT grid."""
        ks = np.meshgrid(*self.momenta(), indexing="ij")
        return sum((2 - 2 * np.cos(k * self.dx)) for k in ks) / self.dx**2


@dataclass(frozen=True)
class HydroParams:
    D: float
    dt: float
    lam: float = 0.0
    Delta: float = 0.0
    sigma_n: float = 0.0

    def check(self, grid: FieldGrid):
        if self.D <= 0:
            raise ValueError("D must be positive")
        if min(self.Delta, self.sigma_n) < 0:
            raise ValueError("noise strengths must be nonnegative")
        limit = grid.dx**2 / (2 * grid.d * self.D)
        if self.dt <= 0 or self.dt > limit:
            raise ValueError(f"dt={self.dt} violates explicit stability dt <= {limit:.4g}")


@dataclass(frozen=True)
class CGLEParams:
    K_c: float
    K_d: float
    r_c: float
    r_d: float
    g_c: float
    g_d: float
    gamma: float
    dt: float

    def check(self, grid: FieldGrid):
        if self.K_d < 0:
            raise ValueError("K_d must be nonnegative")
        if self.g_d <= 0:
            raise ValueError("g_d must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.K_d > 0 and self.dt > grid.dx**2 / (2 * grid.d * self.K_d):
            raise ValueError("dt violates the diffusive stability bound")


@dataclass
class HydroTrajectory:
    times: np.ndarray
    fields: np.ndarray  # (n_snapshots, realizations, *grid.shape)
    grid: FieldGrid
    seed: int | None = None
    extras: dict = field(default_factory=dict)

    @property
    def realizations(self) -> int:
        return self.fields.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.fields[-1]


def laplacian(u: np.ndarray, d: int, dx: float = 1.0) -> np.ndarray:
    """Centred periodic Laplacian over the last ``d`` axes."""
    out = -2 * d * u
    for ax in range(u.ndim - d, u.ndim):
        out = out + np.roll(u, 1, ax) + np.roll(u, -1, ax)
    return out / dx**2


def grad_squared(u: np.ndarray, d: int, dx: float = 1.0, tilt=None) -> np.ndarray:
    """``(grad u)^2`` as the mean of squared forward and backward differences.

    ``tilt`` adds a constant slope per axis (screw boundary conditions).
    """
    out = np.zeros_like(u)
    for i, ax in enumerate(range(u.ndim - d, u.ndim)):
        s = 0.0 if tilt is None else float(np.atleast_1d(tilt)[i])
        fwd = (np.roll(u, -1, ax) - u) / dx + s
        bwd = (u - np.roll(u, 1, ax)) / dx + s
        out = out + 0.5 * (fwd**2 + bwd**2)
    return out


def _snap_steps(T, dt, sample_times, stride):
    nsteps = int(round(T / dt))
    if nsteps < 1:
        raise ValueError("T must be at least one step")
    if sample_times is not None:
        steps = np.unique(np.clip(np.rint(np.asarray(sample_times) / dt).astype(int), 0, nsteps))
    else:
        steps = np.arange(0, nsteps + 1, max(int(stride), 1))
        if steps[-1] != nsteps:
            steps = np.append(steps, nsteps)
    return nsteps, set(steps.tolist())


def _run(step, u0, T, dt, grid, seed, sample_times, stride, check_blowup=True):
    nsteps, snaps = _snap_steps(T, dt, sample_times, stride)
    u = u0.copy()
    times, frames = [], []
    if 0 in snaps:
        times.append(0.0)
        frames.append(u.copy())
    for n in range(1, nsteps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            u = step(u)
        if check_blowup and (n % 64 == 0 or n == nsteps):
            m = np.max(np.abs(u))
            if not np.isfinite(m) or m > BLOWUP:
                raise InstabilityError(f"field exceeded {BLOWUP:g} at t={n * dt:.4g}")
        if n in snaps:
            times.append(n * dt)
            frames.append(u.copy())
    return HydroTrajectory(np.array(times), np.array(frames), grid, seed)


def _init(init, realizations, grid, dtype=float):
    if init is None:
        return np.zeros((realizations,) + grid.shape, dtype=dtype)
    init = np.asarray(init, dtype=dtype)
    if init.shape == grid.shape:
        return np.broadcast_to(init, (realizations,) + grid.shape).copy()
    if init.shape == (realizations,) + grid.shape:
        return init.copy()
    raise ValueError("initial field has the wrong shape")


def cgle_run(params: CGLEParams, grid: FieldGrid, T: float, seed=None, realizations: int = 1,
             init=None, sample_times=None, stride: int = 1) -> HydroTrajectory:
    """Complex Ginzburg-Landau Langevin equation for the order parameter.

    ``i d psi/dt = [-(K_c - i K_d) lap + r_c - i r_d + (g_c - i g_d)|psi|^2] psi + xi``
    with ``<xi xi^*> = 2 gamma delta(x) delta(t)``.
    """
    params.check(grid)
    rng = np.random.default_rng(seed)
    dt, d, dx = params.dt, grid.d, grid.dx
    amp = np.sqrt(2 * params.gamma * dt / dx**d / 2)
    lin = params.r_c - 1j * params.r_d
    nl = params.g_c - 1j * params.g_d
    kin = params.K_c - 1j * params.K_d

    def step(psi):
        drift = -1j * (-kin * laplacian(psi, d, dx) + (lin + nl * np.abs(psi) ** 2) * psi)
        psi = psi + dt * drift
        if amp:
            noise = rng.standard_normal(psi.shape) + 1j * rng.standard_normal(psi.shape)
            psi = psi - 1j * amp * noise
        return psi

    u0 = _init(init, realizations, grid, complex)
    return _run(step, u0, T, dt, grid, seed, sample_times, stride)


def amplitude_ode_solution(rho0: float, r_d: float, g_d: float, t) -> np.ndarray:
    """``|psi|^2(t)`` for ``d psi/dt = -(r_d + g_d |psi|^2) psi`` (noise-free, uniform)."""
    t = np.asarray(t, dtype=float)
    if r_d == 0:
        return rho0 / (1 + 2 * g_d * rho0 * t)
    if r_d > 0:
        e = np.exp(-2 * r_d * t)
        return r_d * rho0 * e / (r_d + g_d * rho0 * (1 - e))
    f = np.exp(2 * r_d * t)
    return r_d * rho0 / (r_d * f + g_d * rho0 * (f - 1))


def kpz_run(params: HydroParams, grid: FieldGrid, T: float, seed=None, realizations: int = 1,
            init=None, sample_times=None, stride: int = 1, tilt=None) -> HydroTrajectory:
    """``d theta/dt = D lap theta + (lam/2)(grad theta)^2 + eta``.

    With ``tilt`` the stored field is the periodic part of ``theta - s.x``.
    """
    params.check(grid)
    rng = np.random.default_rng(seed)
    dt, d, dx = params.dt, grid.d, grid.dx
    amp = np.sqrt(2 * params.Delta * dt / dx**d)
    half_lam = 0.5 * params.lam

    def step(th):
        drift = params.D * laplacian(th, d, dx)
        if half_lam:
            drift = drift + half_lam * grad_squared(th, d, dx, tilt)
        th = th + dt * drift
        if amp:
            th = th + amp * rng.standard_normal(th.shape)
        return th

    u0 = _init(init, realizations, grid)
    return _run(step, u0, T, dt, grid, seed, sample_times, stride)


def phase_diffusion_run(params: HydroParams, grid: FieldGrid, T: float, seed=None, realizations: int = 1,
                        init=None, sample_times=None, stride: int = 1) -> HydroTrajectory:
    """Linear stochastic heat equation ``d theta/dt = D lap theta + eta``."""
    lin = HydroParams(params.D, params.dt, 0.0, params.Delta, params.sigma_n)
    return kpz_run(lin, grid, T, seed, realizations, init, sample_times, stride)


def conserved_density_run(params: HydroParams, grid: FieldGrid, T: float, seed=None, realizations: int = 1,
                          init=None, sample_times=None, stride: int = 1) -> HydroTrajectory:
    """``du/dt = D lap u - div zeta`` with white bond noise of strength ``sigma_n``.

    Every update is a sum of bond differences, so ``sum(u)`` is unchanged up
    to floating-point rounding.
    """
    params.check(grid)
    rng = np.random.default_rng(seed)
    dt, d, dx = params.dt, grid.d, grid.dx
    amp = np.sqrt(2 * params.sigma_n * dt / dx**d) / dx

    def step(u):
        new = u + dt * params.D * laplacian(u, d, dx)
        if amp:
            for ax in range(1, d + 1):
                # flux on the bond between x and x + 1 along this axis
                flux = amp * rng.standard_normal(u.shape)
                new = new - (flux - np.roll(flux, 1, ax))
        return new

    u0 = _init(init, realizations, grid)
    return _run(step, u0, T, dt, grid, seed, sample_times, stride)


def heat_kernel(grid: FieldGrid, D: float, t: float, mass: float = 1.0, images: int = 3) -> np.ndarray:
    """Periodized Gaussian ``(4 pi D t)^{-d/2} exp(-x^2 / 4 D t)`` centred at the origin site."""
    x = np.arange(grid.L) * grid.dx
    span = grid.L * grid.dx
    one = np.zeros(grid.L)
    for m in range(-images, images + 1):
        one += np.exp(-((x + m * span) ** 2) / (4 * D * t))
    one /= np.sqrt(4 * np.pi * D * t)
    out = mass
    for _ in range(grid.d):
        out = np.multiply.outer(out, one) if np.ndim(out) else out * one
    return np.asarray(out)


# --------------------------------------------------------------------------
# estimators


@dataclass
class StructureFactor:
    khat2: np.ndarray
    S: np.ndarray
    err: np.ndarray
    samples: int


def _window(traj: HydroTrajectory, window):
    if window is None:
        return np.ones(len(traj.times), bool)
    t0, t1 = window
    sel = (traj.times >= t0) & (traj.times <= t1)
    if not sel.any():
        raise ValueError("no snapshots inside the window")
    return sel


def structure_factor(traj: HydroTrajectory, window=None) -> StructureFactor:
    """``<|FFT u|^2> / L^d`` averaged over snapshots in ``window`` and realizations.

    Error bars come from the scatter of per-realization time averages.
    """
    g = traj.grid
    f = traj.fields[_window(traj, window)]
    axes = tuple(range(2, 2 + g.d))
    power = np.abs(np.fft.fftn(f, axes=axes)) ** 2 * g.dx ** (2 * g.d) / (g.volume * g.dx**g.d)
    per_real = power.mean(axis=0)
    R = per_real.shape[0]
    S = per_real.mean(axis=0)
    err = per_real.std(axis=0, ddof=1) / np.sqrt(R) if R > 1 else np.full_like(S, np.nan)
    return StructureFactor(g.khat2(), S, err, f.shape[0] * R)


def ou_stationary_variance(a, noise_var_rate, dt):
    """Stationary variance of the Euler-discretized OU step ``x -> (1 - a dt) x + sqrt(q dt) xi``."""
    a = np.asarray(a, dtype=float)
    return noise_var_rate / (a * (2 - a * dt))


@dataclass
class WidthGrowth:
    times: np.ndarray
    W2: np.ndarray
    beta: float
    flat: bool


def width_growth(traj: HydroTrajectory, window=None) -> WidthGrowth:
    """Squared interface width and growth exponent ``W ~ t^beta``.

    ``W^2`` is the spatial variance averaged over realizations; ``beta`` is
    half the least-squares slope of ``log W^2`` against ``log t`` in the window.
    """
    g = traj.grid
    axes = tuple(range(2, 2 + g.d))
    W2 = traj.fields.var(axis=axes).mean(axis=1)
    t = traj.times
    sel = _window(traj, window) & (t > 0)
    if W2[sel].max(initial=0.0) < 1e-24 or np.ptp(W2[sel]) < 1e-12 * max(W2[sel].max(), 1e-300):
        return WidthGrowth(t, W2, float("nan"), True)
    slope = np.polyfit(np.log(t[sel]), np.log(W2[sel]), 1)[0]
    return WidthGrowth(t, W2, float(slope / 2), False)


def ew_width_squared(grid: FieldGrid, D: float, Delta: float, t) -> np.ndarray:
    """Exact lattice Edwards-Wilkinson ``W^2(t)`` from a flat start (continuous time)."""
    k2 = grid.khat2().ravel()[1:]
    t = np.atleast_1d(np.asarray(t, dtype=float))
    modes = (Delta / (D * k2))[None, :] * (1 - np.exp(-2 * D * k2[None, :] * t[:, None]))
    return modes.sum(axis=1) / (grid.volume * grid.dx**grid.d)


def growth_velocity(traj: HydroTrajectory, window=None) -> float:
    """Slope of the spatially averaged height against time."""
    g = traj.grid
    sel = _window(traj, window)
    h = traj.fields[sel].mean(axis=tuple(range(1, 2 + g.d)))
    return float(np.polyfit(traj.times[sel], h, 1)[0])


# --------------------------------------------------------------------------
# phase correlators


def _gaussian_propagator(grid: FieldGrid, D: float, sigma_n: float, n_omega: int = 256, t_max: float = 256.0):
    """Equal-time ``<theta_q theta_q>`` and ``<u_c u_c>`` per momentum from the quadratic action.

    Per mode the action is ``(u, theta)^dag K (u, theta)`` with
    ``K = [[0, A^*/2], [A/2, i sigma k^2]]`` and ``A = -i omega + D k^2``
    (constant factors drop out of ratios). Equal-time correlators are
    frequency sums of ``(i/2) K^{-1}`` components.
    """
    k2 = grid.khat2().ravel()
    omegas = 2 * np.pi * np.fft.fftfreq(n_omega, d=t_max / n_omega)
    dw = 2 * np.pi / t_max
    G_tt = np.zeros(k2.shape)
    G_uu = np.zeros(k2.shape)
    for w in omegas:
        A = -1j * w + D * k2
        K = np.zeros(k2.shape + (2, 2), complex)
        K[:, 0, 1] = np.conj(A) / 2
        K[:, 1, 0] = A / 2
        K[:, 1, 1] = 1j * sigma_n * k2
        Kinv = np.linalg.pinv(K)
        G = 0.5j * Kinv
        G_tt += G[:, 1, 1].real * dw / (2 * np.pi)
        G_uu += G[:, 0, 0].real * dw / (2 * np.pi)
    return k2, G_tt, G_uu


def renyi2_proxy_theta_q(grid: FieldGrid, D: float, sigma_n: float, separation: int | None = None) -> float:
    """Gaussian-theory ``<exp(i theta_q(x)) exp(-i theta_q(0))>``.

    Evaluated as ``exp(-<(theta_q(x) - theta_q(0))^2> / 2)`` from the
    propagator of the quadratic density action; ``separation`` defaults to
    ``L / 2`` along the first axis, the largest distance on the torus.
    """
    if D <= 0 or sigma_n < 0:
        raise ValueError("need D > 0 and sigma_n >= 0")
    x = grid.L // 2 if separation is None else int(separation)
    k2, G_tt, _ = _gaussian_propagator(grid, D, sigma_n)
    kx = np.meshgrid(*grid.momenta(), indexing="ij")[0].ravel()
    var = np.sum(G_tt * (2 - 2 * np.cos(kx * x * grid.dx))) / grid.volume
    return float(np.exp(-0.5 * var))


def theta_c_correlation(grid: FieldGrid, D: float, Delta: float, separation: int | None = None) -> float:
    """Stationary Gaussian ``<exp(i theta_c(x)) exp(-i theta_c(0))>`` for linear phase diffusion.

    Uses ``<|theta_k|^2> = Delta / (D k^2)`` without the zero mode; decays
    with separation for ``d <= 2``.
    """
    x = grid.L // 2 if separation is None else int(separation)
    k2 = grid.khat2().ravel()
    kx = np.meshgrid(*grid.momenta(), indexing="ij")[0].ravel()
    nz = k2 > 1e-14
    var = np.sum(Delta / (D * k2[nz]) * (2 - 2 * np.cos(kx[nz] * x * grid.dx))) / grid.volume
    return float(np.exp(-0.5 * var))


def phase_correlation(traj: HydroTrajectory, separation: int, window=None, tol: float = 0.2) -> complex:
    """Empirical ``<exp(i theta(x)) exp(-i theta(0))>`` over sites, snapshots and realizations.

    Raises if the phase-difference variance in the two halves of the window
    differs by more than ``tol`` (relative).
    """
    f = traj.fields[_window(traj, window)]
    if f.shape[0] < 2:
        raise NonStationaryError("need at least two snapshots")
    diff = np.roll(f, -int(separation), axis=2) - f
    half = f.shape[0] // 2
    v1, v2 = diff[:half].var(), diff[half:].var()
    if abs(v1 - v2) > tol * max(v1, v2, 1e-300):
        raise NonStationaryError(f"phase-difference variance drifts ({v1:.4g} vs {v2:.4g})")
    return complex(np.mean(np.exp(1j * diff)))
