import numpy as np
import pytest
from hypothesis import given, strategies as st

from weylcomp import cxmat
from weylcomp.errors import NonFinite, NonHermitian, NonSquare

seeds = st.integers(0, 2**32 - 1)


def test_identity_eigs():
    e = cxmat.herm_eig(np.eye(3))
    assert np.allclose(e.eigenvalues, [1, 1, 1])


def test_rank_one_plus_identity():
    c = np.exp(0.7j)
    w = cxmat.eigvalsh([[1, c], [np.conj(c), 1]])
    assert np.allclose(w, [0, 2], atol=1e-14)


@given(seeds)
def test_reconstruction(seed):
    rng = np.random.default_rng(seed)
    m = cxmat.random_hermitian(6, rng)
    e = cxmat.herm_eig(m)
    assert np.all(np.diff(e.eigenvalues) >= 0)
    assert np.max(np.abs(e.reconstruct() - m)) < 1e-10 * max(1, cxmat.frob(m))
    v = e.eigenvectors
    assert np.max(np.abs(v.conj().T @ v - np.eye(6))) < 1e-10


def test_errors():
    with pytest.raises(NonSquare):
        cxmat.herm_eig(np.ones((2, 3)))
    with pytest.raises(NonSquare):
        cxmat.herm_eig(np.ones(3))
    with pytest.raises(NonHermitian):
        cxmat.herm_eig([[0, 1], [0, 0]])
    with pytest.raises(NonFinite):
        cxmat.herm_eig([[np.nan, 0], [0, 1]])


def test_small_drift_is_symmetrized():
    m = np.eye(2) + 1e-9j * np.array([[0, 1], [0, 0]])
    assert np.allclose(cxmat.eigvalsh(m), [1, 1])


@pytest.mark.parametrize("diag, expected", [((2, 0.5), 0.5), ((1, -1), -1)])
def test_min_eig(diag, expected):
    assert cxmat.min_eig(np.diag(diag)) == pytest.approx(expected)


def test_is_psd_tolerance():
    assert cxmat.is_psd(np.diag([1, -1e-11]))
    assert not cxmat.is_psd(np.diag([1, -1e-9]))
    assert cxmat.is_psd(np.diag([1, -1e-9]), tol=1e-8)


@given(seeds)
def test_kron_of_psd_is_psd(seed):
    rng = np.random.default_rng(seed)
    a, b = cxmat.random_psd(3, rng), cxmat.random_psd(4, rng)
    assert cxmat.min_eig(cxmat.kron(a, b)) >= -1e-10


def test_psd_project_examples(rng):
    assert np.allclose(cxmat.psd_project(np.diag([1, -1])), np.diag([1, 0]))
    p = cxmat.random_psd(4, rng)
    assert np.max(np.abs(cxmat.psd_project(p) - p)) < 1e-10


def test_psd_project_sampled_optimality(rng):
    m = cxmat.random_hermitian(5, rng)
    p = cxmat.psd_project(m)
    assert cxmat.min_eig(p) >= -1e-12
    dist = cxmat.frob(m - p)
    for _ in range(200):
        q = cxmat.random_psd(5, rng, rank=int(rng.integers(1, 6))) * rng.uniform(0, 1)
        assert dist <= cxmat.frob(m - q) + 1e-12


@given(seeds)
def test_positive_negative_split(seed):
    m = cxmat.random_hermitian(5, np.random.default_rng(seed))
    pos, neg = cxmat.psd_project(m), cxmat.psd_project(-m)
    assert np.max(np.abs(m - (pos - neg))) < 1e-10
    assert abs(np.trace(pos.conj().T @ neg)) < 1e-8


@given(seeds, st.integers(2, 16))
def test_schur_product_psd(seed, n):
    rng = np.random.default_rng(seed)
    a, b = cxmat.random_psd(n, rng), cxmat.random_psd(n, rng)
    assert cxmat.min_eig(a * b) >= -1e-10 * max(1.0, cxmat.frob(a) * cxmat.frob(b))


@given(seeds)
def test_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    m = cxmat.random_hermitian(5, rng)
    u = cxmat.random_unitary(5, rng)
    assert np.allclose(cxmat.eigvalsh(u @ m @ u.conj().T), cxmat.eigvalsh(m), atol=1e-9)


def test_kron_examples(rng):
    assert np.array_equal(cxmat.kron(np.eye(2), np.eye(2)), np.eye(4))
    assert np.allclose(cxmat.kron(np.diag([1, 2]), np.diag([3, 4])), np.diag([3, 4, 6, 8]))
    a, b = cxmat.random_hermitian(3, rng), cxmat.random_hermitian(2, rng)
    assert np.trace(cxmat.kron(a, b)) == pytest.approx(np.trace(a) * np.trace(b))
    k = cxmat.kron(a, b)
    assert k[1 * 2 + 0, 2 * 2 + 1] == a[1, 2] * b[0, 1]


def test_dykstra_finds_intersection():
    # unit-diagonal PSD matrices with a fixed off-diagonal entry
    def project(x):
        y = x.copy()
        np.fill_diagonal(y, 1)
        y[0, 1], y[1, 0] = 0.9, 0.9
        return y

    res = cxmat.dykstra_psd_affine(
        np.eye(3, dtype=complex), project,
        lambda x, y: cxmat.frob(x - y) < 1e-10, infeas_tol=1e-5, max_iter=5000,
    )
    assert res.status == "certified"


def test_dykstra_separates():
    def project(x):
        y = x.copy()
        np.fill_diagonal(y, 1)
        y[0, 1], y[1, 0] = 2.0, 2.0  # |entry| > 1 with unit diagonal: never PSD
        return y

    res = cxmat.dykstra_psd_affine(
        np.eye(2, dtype=complex), project, lambda x, y: False, infeas_tol=1e-5, max_iter=20000,
    )
    assert res.status == "separated"
    assert res.gap >= 1e-5
