"""Periodic bipartite lattices and B-sublattice momentum grids."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


class InvalidLatticeError(ValueError):
    pass


@dataclass(frozen=True)
class Lattice:
    """Periodic hypercubic lattice with a checkerboard A/B split.

    Sites are numbered row-major over ``dims`` (last coordinate fastest).
    ``neighbors[i]`` keeps duplicates on side-2 directions, so the two
    periodic bonds of an ``L=2`` ring are both present.
    """

    dims: tuple[int, ...]
    sublattice: tuple[str, ...]
    neighbors: tuple[tuple[int, ...], ...]

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def site_count(self) -> int:
        return len(self.sublattice)

    @property
    def coordination(self) -> int:
        return 2 * self.d

    def coords(self, i: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(i, self.dims))

    def index(self, coords) -> int:
        return int(np.ravel_multi_index(tuple(c % n for c, n in zip(coords, self.dims)), self.dims))

    def is_A(self, i: int) -> bool:
        return self.sublattice[i] == "A"

    @property
    def a_sites(self) -> list[int]:
        return [i for i, s in enumerate(self.sublattice) if s == "A"]

    @property
    def b_sites(self) -> list[int]:
        return [i for i, s in enumerate(self.sublattice) if s == "B"]

    def bonds(self) -> list[tuple[int, int]]:
        """Nearest-neighbour bonds ``(i, j)`` with ``i < j``, with multiplicity."""
        return [(i, j) for i, nbrs in enumerate(self.neighbors) for j in nbrs if i < j]

    def ab_bonds(self) -> list[tuple[int, int]]:
        """Bonds oriented as ``(a, b)`` with ``a`` on A and ``b`` on B."""
        return [(i, j) if self.is_A(i) else (j, i) for i, j in self.bonds()]

    def translation(self, shift) -> np.ndarray:
        """Site permutation ``perm[i] = i + shift`` (periodic)."""
        shift = tuple(shift)
        if len(shift) != self.d:
            raise ValueError("shift must have one entry per dimension")
        return np.array(
            [self.index(tuple(c + s for c, s in zip(self.coords(i), shift))) for i in range(self.site_count)]
        )


def _build(dims: tuple[int, ...]) -> Lattice:
    for n in dims:
        if n < 2 or n % 2:
            raise InvalidLatticeError(f"side lengths must be even and >= 2, got {dims}")
    sites = list(itertools.product(*(range(n) for n in dims)))
    sub = tuple("A" if sum(c) % 2 == 0 else "B" for c in sites)
    nbrs = []
    for c in sites:
        row = []
        for axis in range(len(dims)):
            for step in (1, -1):
                cc = list(c)
                cc[axis] = (cc[axis] + step) % dims[axis]
                row.append(int(np.ravel_multi_index(tuple(cc), dims)))
        nbrs.append(tuple(row))
    return Lattice(dims=tuple(dims), sublattice=sub, neighbors=tuple(nbrs))


def build_chain(L: int) -> Lattice:
    """Periodic chain; even sites are A."""
    return _build((int(L),))


def build_square(Lx: int, Ly: int) -> Lattice:
    """Periodic ``Lx x Ly`` square lattice with checkerboard sublattices."""
    return _build((int(Lx), int(Ly)))


def on_bose_surface(k, tol: float = 1e-12) -> bool:
    """True iff ``|prod_i cos(k_i / 2)| <= tol`` (k in B-sublattice units)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return bool(abs(np.prod(np.cos(k / 2))) <= tol)


def wrap_momentum(k) -> np.ndarray:
    """Map momentum components into ``(-pi, pi]``."""
    k = np.asarray(k, dtype=float)
    w = np.mod(k + np.pi, 2 * np.pi) - np.pi
    return np.where(np.isclose(w, -np.pi, atol=1e-12), np.pi, w)


# B-sublattice Bravais vectors in lattice coordinates. In 1D the B chain has
# spacing 2; in 2D the B sites form the 45-degree rotated square lattice.
_B_VECTORS = {1: np.array([[2]]), 2: np.array([[1, 1], [1, -1]])}


def b_coordinates(lattice: Lattice) -> np.ndarray:
    """Integer Bravais coordinates of every B site, shape ``(n_B, d)``.

    The origin is the B site at ``(1, 0, ...)``; coordinates are only defined
    modulo the periodicity, which is harmless for momenta on the B grid.
    """
    if lattice.d not in _B_VECTORS:
        raise InvalidLatticeError("B-sublattice coordinates need d <= 2")
    vecs = _B_VECTORS[lattice.d]
    inv = np.linalg.inv(vecs.T.astype(float))
    origin = np.zeros(lattice.d)
    origin[0] = 1
    out = []
    for b in lattice.b_sites:
        m = inv @ (np.array(lattice.coords(b)) - origin)
        out.append(np.rint(m).astype(int))
    return np.array(out)


def b_momenta(lattice: Lattice) -> list[np.ndarray]:
    """Momenta compatible with the B sublattice of a periodic lattice."""
    if lattice.d == 1:
        nb = lattice.dims[0] // 2
        return [wrap_momentum([2 * np.pi * m / nb]) for m in range(nb)]
    if lattice.d != 2:
        raise InvalidLatticeError("B-sublattice momenta need d <= 2")
    Lx, Ly = lattice.dims
    # lattice translations Lx*x and Ly*y in B coordinates
    vecs = _B_VECTORS[2].T.astype(float)
    periods = [np.linalg.solve(vecs, [Lx, 0]), np.linalg.solve(vecs, [0, Ly])]
    # reciprocal grid: k . period in 2 pi Z for both periods
    P = np.array(periods)
    seen = {}
    for p in range(-Lx, Lx + 1):
        for q in range(-Ly, Ly + 1):
            k = wrap_momentum(np.linalg.solve(P, 2 * np.pi * np.array([p, q])))
            key = tuple(np.round(k, 9))
            seen.setdefault(key, k)
    out = sorted(seen.values(), key=lambda v: tuple(v))
    if len(out) != len(lattice.b_sites):
        raise RuntimeError("inconsistent B momentum grid")
    return out


def b_plane_wave(lattice: Lattice, k) -> np.ndarray:
    """Amplitudes ``exp(i k . r)`` on B sites (zeros on A), full-site array."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    psi = np.zeros(lattice.site_count, dtype=complex)
    psi[lattice.b_sites] = np.exp(1j * (b_coordinates(lattice) @ k))
    return psi


def lattice_laplacian_symbol(k, dx: float = 1.0) -> float:
    """``sum_i (2 - 2 cos(k_i dx)) / dx^2``, the centred-difference Laplacian."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return float(np.sum(2 - 2 * np.cos(k * dx)) / dx**2)
