import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sslab import hilbert
from sslab import lindblad as lb
from sslab import perturbation as pt
from sslab.lattice import build_chain, build_square


def test_single_site_eigenvalues():
    vals = [t.eigenvalue for t in pt.single_site_loss_spectrum(0.7)]
    np.testing.assert_allclose(vals, [0, -0.7, -0.7, -1.4])


def test_single_site_triples_are_eigenvectors():
    G = 0.7
    spec = lb.LindbladSpec(np.zeros((2, 2)), ((G, np.array([[0, 0], [1, 0]])),))
    M = lb.vectorize(spec).matrix.toarray()
    for t in pt.single_site_loss_spectrum(G):
        r = t.right.reshape(-1)
        l_ = t.left.reshape(-1)
        np.testing.assert_allclose(M @ r, t.eigenvalue * r, atol=1e-12)
        np.testing.assert_allclose(l_.conj() @ M, t.eigenvalue * l_.conj(), atol=1e-12)


def test_single_site_steady_pair():
    t0 = pt.single_site_loss_spectrum(1.0)[0]
    np.testing.assert_array_equal(t0.left, np.eye(2))
    np.testing.assert_array_equal(t0.right, np.diag([0, 1]))  # index 1 = down


def test_biorthonormality():
    B = pt.biorthonormality_matrix(pt.single_site_loss_spectrum(1.3))
    assert np.abs(B - np.eye(4)).max() < 1e-12


def test_effective_I_chain_slowest():
    vals = pt.effective_liouvillian_I(build_chain(4), 0.3, 1.0).eigenvalues()
    assert vals[0].real == pytest.approx(-0.4)


def test_effective_I_square_slowest():
    vals = pt.effective_liouvillian_I(build_square(4, 4), 0.1, 1.0).eigenvalues()
    assert vals[0].real == pytest.approx(-0.6)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 0.5), st.floats(0.1, 2.0))
def test_effective_I_structure(J, G):
    lat = build_chain(6)
    gen = pt.effective_liouvillian_I(lat, J, G)
    A = gen.dense() + G * np.eye(6)
    # the off-diagonal part is Hermitian: real spectrum inside the band
    np.testing.assert_allclose(A, A.conj().T, atol=1e-14)
    vals = gen.eigenvalues()
    assert np.abs(vals.imag).max() < 1e-12
    assert vals.real.min() >= -G - 2 * J - 1e-12 and vals.real.max() <= -G + 2 * J + 1e-12


def test_compare_perturbative_I_quadratic():
    lat = build_chain(4)
    devs = [pt.compare_perturbative_I(lat, J, 1.0) for J in (0.01, 0.02, 0.04)]
    assert devs[1] <= 0.01
    assert devs[1] / devs[0] == pytest.approx(4, abs=0.5)
    assert devs[2] / devs[1] == pytest.approx(4, abs=0.5)
    assert pt.compare_perturbative_I(lat, 0.0, 1.0) < 1e-14


def test_compare_perturbative_I_size_limit():
    with pytest.raises(pt.SystemTooLargeError):
        pt.compare_perturbative_I(build_chain(8), 0.01, 1.0)


def test_heisenberg_polarized_zero():
    H = pt.effective_heisenberg_III(6, 0.2, 1.0).dense()
    assert H[0, 0] == pytest.approx(0) and H[-1, -1] == pytest.approx(0)


def test_heisenberg_one_magnon():
    spec = pt.effective_momentum_spectrum(8, 0.2, 1.0, charge=1)
    assert spec[(1, 1)][0] == pytest.approx(0.0058579, abs=1e-7)
    assert spec[(1, 0)][0] == pytest.approx(0, abs=1e-14)


@pytest.mark.parametrize("L", [4, 6, 8])
def test_heisenberg_nonnegative_unique_zero(L):
    gen = pt.effective_heisenberg_III(L, 0.3, 1.0)
    q = hilbert.total_charge(L, hilbert.spin_algebra(0.5))
    H = gen.dense()
    for N in hilbert.charge_sectors(q):
        idx = hilbert.sector_basis(q, N)
        vals, vecs = np.linalg.eigh(H[np.ix_(idx, idx)])
        assert vals[0] > -1e-12
        assert np.sum(np.abs(vals) < 1e-12) == 1
        v = vecs[:, 0]
        np.testing.assert_allclose(np.abs(v), 1 / np.sqrt(len(idx)), atol=1e-10)


def test_heisenberg_opposite_sign_is_nonpositive():
    vals = pt.effective_heisenberg_III(6, 0.3, 1.0, sign_corrected=False).eigenvalues()
    assert vals.max() < 1e-12 and vals.min() < 0


def test_heisenberg_symmetries():
    L = 6
    H = pt.effective_heisenberg_III(L, 0.3, 1.0).matrix
    N = hilbert.total_charge(L, hilbert.spin_algebra(0.5)).op
    assert abs(N @ H - H @ N).max() < 1e-14
    p = hilbert.basis_translation((np.arange(L) + 1) % L, 2)
    P = sp.csr_matrix((np.ones(2**L), (p, np.arange(2**L))), shape=(2**L,) * 2)
    assert abs(P @ H - H @ P).max() < 1e-14


@pytest.mark.parametrize("S", [0.5, 1])
def test_rate_matrix_matches_superoperator_route(S):
    W = pt.config_rate_matrix(3, S, 0.2, 1.0).toarray()
    np.testing.assert_allclose(W.sum(axis=0), 0, atol=1e-14)
    ref = pt.second_order_superoperator_III(3, S, 0.2, 0.7, 1.0)
    np.testing.assert_allclose(W, ref, atol=1e-14)


def test_closed_form_matches_rate_matrix():
    H = pt.effective_heisenberg_III(4, 0.3, 1.0).dense()
    W = pt.config_rate_matrix(4, 0.5, 0.3, 1.0).toarray()
    np.testing.assert_allclose(H, -W, atol=1e-14)


def test_goldstone_k0_zero():
    for S, L, N in ((0.5, 8, 3), (1, 6, 4)):
        assert pt.goldstone_variational_energy(L, S, N, 0.0, 0.2, 1.0) == pytest.approx(0, abs=1e-14)


def test_goldstone_k2_ratio_spin_half():
    L = 12
    k = 2 * np.pi / L
    e1 = pt.goldstone_variational_energy(L, 0.5, 1, k, 0.2, 1.0)
    e2 = pt.goldstone_variational_energy(L, 0.5, 1, 2 * k, 0.2, 1.0)
    assert e2 / e1 == pytest.approx(4, abs=0.3)


def test_goldstone_spin_one_follows_cosine():
    L = 8
    k = 2 * np.pi / L
    e1 = pt.goldstone_variational_energy(L, 1, 3, k, 0.2, 1.0)
    e2 = pt.goldstone_variational_energy(L, 1, 3, 2 * k, 0.2, 1.0)
    assert e2 / e1 == pytest.approx((1 - np.cos(2 * k)) / (1 - np.cos(k)), rel=1e-10)


def test_goldstone_off_grid():
    with pytest.raises(ValueError):
        pt.goldstone_variational_energy(6, 0.5, 2, 0.3, 0.2, 1.0)


def test_second_order_validation():
    rep = pt.validate_III_second_order(6, 0.1, 1.0)
    assert rep.max_rel() <= 0.15
    half = pt.validate_III_second_order(6, 0.05, 1.0)
    assert rep.max_abs / half.max_abs == pytest.approx(16, rel=0.1)
    assert rep.max_rel() / half.max_rel() == pytest.approx(4, rel=0.1)


def test_second_order_weak_Jz_dependence():
    a = pt.validate_III_second_order(6, 0.1, 1.0, J_z=0.0, sectors=[3])
    b = pt.validate_III_second_order(6, 0.1, 1.0, J_z=0.5, sectors=[3])
    exact_a = np.array([r[2] for r in a.rows])
    exact_b = np.array([r[2] for r in b.rows])
    pred = np.array([r[3] for r in a.rows])
    assert np.allclose([r[3] for r in b.rows], pred)
    nz = np.abs(pred) > 1e-12
    assert np.max(np.abs(exact_b - exact_a)[nz] / np.abs(pred[nz])) < 0.1


def test_gamma_must_be_positive():
    with pytest.raises(ValueError):
        pt.effective_heisenberg_III(4, 0.1, 0.0)
    with pytest.raises(ValueError):
        pt.single_site_loss_spectrum(-1)
