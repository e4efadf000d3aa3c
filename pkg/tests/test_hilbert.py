import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sslab import hilbert
from sslab.lattice import build_chain

spins = st.sampled_from([0.5, 1, 1.5, 2])


def test_spin_half():
    a = hilbert.spin_algebra(0.5)
    np.testing.assert_array_equal(a.raising, [[0, 1], [0, 0]])
    np.testing.assert_array_equal(np.diag(a.diag).real, [0.5, -0.5])
    comm = a.raising @ a.lowering - a.lowering @ a.raising
    np.testing.assert_allclose(comm, 2 * a.diag)


def test_spin_one_diag():
    np.testing.assert_array_equal(np.diag(hilbert.spin_algebra(1).diag).real, [1, 0, -1])


@pytest.mark.parametrize("S", [0, 0.3, -1, 0.25])
def test_spin_invalid(S):
    with pytest.raises(ValueError):
        hilbert.spin_algebra(S)


@settings(max_examples=10, deadline=None)
@given(spins)
def test_su2_relations(S):
    a = hilbert.spin_algebra(S)
    Sz, Sp, Sm = a.diag, a.raising, a.lowering
    np.testing.assert_allclose(Sz @ Sp - Sp @ Sz, Sp, atol=1e-12)
    np.testing.assert_allclose(Sz @ Sm - Sm @ Sz, -Sm, atol=1e-12)
    np.testing.assert_allclose(Sp, Sm.conj().T)
    assert a.charge.min() == 0


def test_boson_hard_core():
    np.testing.assert_array_equal(hilbert.boson_algebra(1).raising, [[0, 0], [1, 0]])


def test_boson_number():
    b = hilbert.boson_algebra(2)
    np.testing.assert_allclose(b.raising @ b.lowering, np.diag([0, 1, 2]))


def test_boson_truncation_defect():
    b = hilbert.boson_algebra(3)
    defect = b.lowering @ b.raising - b.raising @ b.lowering - np.eye(4)
    mask = np.ones((4, 4), bool)
    mask[3, 3] = False
    assert np.abs(defect[mask]).max() < 1e-12
    assert abs(defect[3, 3]) > 0


def test_boson_invalid():
    with pytest.raises(ValueError):
        hilbert.boson_algebra(0)


def test_embed_first_site():
    a = hilbert.spin_algebra(0.5)
    np.testing.assert_allclose(hilbert.embed(a.diag, 0, build_chain(2), a).toarray(), np.kron(a.diag, np.eye(2)))


def test_embed_out_of_range():
    a = hilbert.spin_algebra(0.5)
    with pytest.raises(IndexError):
        hilbert.embed(a.diag, 4, 4, a)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 5), st.data())
def test_embed_distinct_sites_commute(n, data):
    a = hilbert.spin_algebra(0.5)
    i = data.draw(st.integers(0, n - 1))
    j = data.draw(st.integers(0, n - 1).filter(lambda x: x != i))
    A = hilbert.embed(a.raising, i, n, a)
    B = hilbert.embed(a.lowering, j, n, a)
    assert abs(A @ B - B @ A).max() == 0
    assert abs(hilbert.embed(a.diag, i, n, a).diagonal().sum()) < 1e-12


def test_total_charge_L2():
    q = hilbert.total_charge(2, hilbert.spin_algebra(0.5))
    assert sorted(q.values.tolist()) == [0, 1, 1, 2]


def test_charge_commutes_with_hopping():
    a = hilbert.spin_algebra(1)
    n = 3
    N = hilbert.total_charge(n, a).op
    H = sum(hilbert.embed(a.raising, i, n, a) @ hilbert.embed(a.lowering, (i + 1) % n, n, a) for i in range(n))
    H = H + H.getH()
    assert abs(N @ H - H @ N).max() < 1e-12


def test_sector_basis_sizes():
    q = hilbert.total_charge(4, hilbert.spin_algebra(0.5))
    assert len(hilbert.sector_basis(q, 2)) == 6
    idx0 = hilbert.sector_basis(q, 0)
    assert len(idx0) == 1
    assert len(hilbert.sector_basis(q, 7)) == 0


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 5), spins)
def test_sectors_partition_basis(n, S):
    alg = hilbert.spin_algebra(S)
    if alg.dim**n > 5000:
        return
    q = hilbert.total_charge(n, alg)
    parts = np.concatenate([hilbert.sector_basis(q, v) for v in hilbert.charge_sectors(q)])
    assert sorted(parts.tolist()) == list(range(alg.dim**n))


def test_basis_translation_cycles():
    p = hilbert.basis_translation(np.roll(np.arange(4), 1), 2)
    P = sp.csr_matrix((np.ones(16), (p, np.arange(16))), shape=(16, 16))
    M = sp.identity(16)
    for _ in range(4):
        M = P @ M
    assert abs(M - sp.identity(16)).max() == 0
