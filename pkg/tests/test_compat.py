import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from weylcomp import channel, compat, cxmat
from weylcomp.compat import JointFn, Kernel
from weylcomp.errors import (
    DimensionMismatch,
    InvalidKernel,
    InvalidProbability,
    NonMember,
    ParamOutOfRange,
    SizeCap,
    WrongDimension,
)

seeds = st.integers(0, 2**32 - 1)


def random_kernel(d, rng, rank=None):
    n = d * d
    b = cxmat.random_psd(n, rng, rank=rank)
    s = 1 / np.sqrt(np.diag(b).real)
    return Kernel(d, b * np.outer(s, s))


def random_probs(d, rng, alpha=0.6):
    return rng.dirichlet(np.full(d * d, alpha))


# --- kernels and the forward map -------------------------------------------------


def test_kernel_validation():
    with pytest.raises(InvalidKernel):
        Kernel(2, np.eye(3))
    with pytest.raises(InvalidKernel):
        Kernel(2, 2 * np.eye(4)).validate()
    bad = np.eye(4)
    bad[0, 1] = bad[1, 0] = 2.0
    with pytest.raises(InvalidKernel):
        Kernel(2, bad).validate()
    asym = np.eye(4, dtype=complex)
    asym[0, 1] = 0.5j
    with pytest.raises(InvalidKernel):
        Kernel(2, asym).validate()
    with pytest.raises(InvalidKernel):
        compat.forward_map(np.full(4, 0.25), bad)


def test_forward_examples(rng):
    for d in (2, 3):
        p = compat.forward_map(channel.delta(d).p, random_kernel(d, rng))
        assert np.allclose(p, 1 / d**2, atol=1e-14)
    p = compat.forward_map(np.full(4, 0.25), np.ones((4, 4)))
    assert np.allclose(p, [1, 0, 0, 0], atol=1e-14)


@pytest.mark.parametrize("d", [2, 3])
def test_forward_matches_oracle(d, rng):
    p1 = random_probs(d, rng)
    k = random_kernel(d, rng)
    assert np.allclose(compat.forward_map(p1, k), oracles.forward_map(d, p1, k.beta).real, atol=1e-13)


@settings(max_examples=25)
@given(st.integers(2, 5), seeds)
def test_forward_is_probability(d, seed):
    rng = np.random.default_rng(seed)
    p2 = compat.forward_map(random_probs(d, rng), random_kernel(d, rng, rank=int(rng.integers(1, d * d + 1))))
    assert p2.min() >= -1e-9
    assert abs(p2.sum() - 1) < 1e-9


def test_depolarizing_kernel_examples():
    assert np.allclose(compat.kernel_for_depolarizing(channel.delta(3).p, 3).beta, 1)
    assert np.allclose(compat.kernel_for_depolarizing(np.full(9, 1 / 9), 3).beta, np.eye(9), atol=1e-14)
    q = [0.5, 0.5, 0, 0]
    k = compat.kernel_for_depolarizing(q, 2).validate()
    assert np.allclose(compat.forward_map(np.full(4, 0.25), k), q, atol=1e-14)
    with pytest.raises(InvalidProbability):
        compat.kernel_for_depolarizing([0.5, 0.6, 0, 0], 2)


@given(st.sampled_from([2, 3, 4]), seeds)
def test_depolarizing_universality(d, seed):
    q = random_probs(d, np.random.default_rng(seed))
    k = compat.kernel_for_depolarizing(q, d).validate()
    assert np.max(np.abs(compat.forward_map(channel.uniform(d).p, k) - q)) < 1e-10


@given(st.sampled_from([2, 3]), seeds, st.integers(0, 80), st.integers(0, 80))
def test_transport_kernel(d, seed, k1, k2):
    rng = np.random.default_rng(seed)
    n = d * d
    k1, k2 = k1 % n, k2 % n
    p1 = channel.CovChannel(d, random_probs(d, rng))
    beta = random_kernel(d, rng)
    p2 = channel.CovChannel(d, compat.forward_map(p1, beta))
    moved = compat.transport_kernel(beta, k1, k2).validate()
    out = compat.forward_map(channel.shift(p1, k1), moved)
    assert np.max(np.abs(out - channel.shift(p2, k2).p)) < 1e-12


# --- joint functions ----------------------------------------------------------------


@given(st.sampled_from([2, 3]), seeds)
def test_joint_margins(d, seed):
    rng = np.random.default_rng(seed)
    p1 = random_probs(d, rng)
    k = random_kernel(d, rng)
    f = compat.joint_fn_from_kernel(p1, k)
    m1, m2 = compat.margins_of_joint(f)
    assert np.max(np.abs(channel.from_char(m1).p - p1)) < 1e-10
    assert np.max(np.abs(channel.from_char(m2).p - compat.forward_map(p1, k))) < 1e-10
    assert abs(f.values[0, 0] - 1) < 1e-12


def test_joint_from_delta(rng):
    f = compat.joint_fn_from_kernel(channel.delta(3).p, random_kernel(3, rng)).values
    assert np.allclose(f[:, 0], 1)
    assert np.allclose(f[:, 1:], 0)


def test_joint_for_depolarizing_partner(rng):
    q = random_probs(2, rng)
    f = compat.joint_fn_from_kernel(channel.uniform(2), compat.kernel_for_depolarizing(q, 2))
    m1, m2 = compat.margins_of_joint(f)
    assert np.allclose(m1.values, np.eye(4)[0], atol=1e-14)
    assert np.allclose(m2.values, channel.char_fn(channel.CovChannel(2, q)).values, atol=1e-14)


def test_product_margins(rng):
    f1 = channel.char_fn(channel.CovChannel(2, random_probs(2, rng))).values
    f2 = channel.char_fn(channel.CovChannel(2, random_probs(2, rng))).values
    m1, m2 = compat.margins_of_joint(JointFn(2, np.outer(f1, f2)))
    assert np.array_equal(m1.values, f1) and np.array_equal(m2.values, f2)


def test_joint_fn_shape():
    with pytest.raises(DimensionMismatch):
        JointFn(2, np.ones((4, 5)))


# --- membership -----------------------------------------------------------------------


def test_membership_matrix_matches_oracle(rng):
    f = compat.joint_fn_from_kernel(random_probs(2, rng), random_kernel(2, rng))
    assert np.allclose(compat.membership_matrix(f), oracles.membership_matrix(2, f.values), atol=1e-13)


@pytest.mark.parametrize("d", [2, 3])
def test_membership_examples(d):
    assert compat.csz_membership(compat.depolarizing_joint(d)).is_member
    rep = compat.csz_membership(compat.symplectic_joint(d))
    assert not rep.is_member
    w = rep.witness
    assert w is not None
    assert w["hermitian_defect"] > 1e-8 or w["min_eig"] < -1e-8
    assert compat.csz_membership(JointFn(d, np.ones((d * d, d * d)))).min_eig < -1e-8


@given(st.sampled_from([2, 3]), seeds)
def test_kernel_joints_are_members(d, seed):
    rng = np.random.default_rng(seed)
    f = compat.joint_fn_from_kernel(random_probs(d, rng), random_kernel(d, rng))
    rep = compat.csz_membership(f)
    assert rep.is_member, rep
    assert cxmat.min_eig(compat.joint_choi(f)) >= -1e-8


@settings(max_examples=60)
@given(seeds)
def test_membership_agrees_with_choi(seed):
    # Twisted positivity and the Choi oracle must agree on members and non-members alike
    rng = np.random.default_rng(seed)
    d = 2
    f = compat.joint_fn_from_kernel(random_probs(d, rng), random_kernel(d, rng)).values
    g = compat.joint_fn_from_kernel(random_probs(d, rng), random_kernel(d, rng)).values
    lam = rng.uniform(-0.6, 1.6)
    h = lam * f + (1 - lam) * g  # affine combinations leave the convex set when lam is outside [0, 1]
    h = 0.5 * (h + np.conj(h[np.ix_(channel.space(d).neg, channel.space(d).neg)]))
    h[0, 0] = 1.0
    jf = JointFn(d, h)
    mem = compat.csz_membership(jf, witness=False)
    choi_min = cxmat.min_eig(compat.joint_choi(jf))
    if abs(choi_min) > 1e-6:
        assert mem.is_member == (choi_min > 0)
    assert (mem.min_eig >= -1e-10) == (choi_min >= -1e-10) or abs(choi_min) < 1e-6


def test_joint_choi_matches_oracle(rng):
    f = compat.joint_fn_from_kernel(random_probs(2, rng), random_kernel(2, rng))
    assert np.allclose(compat.joint_choi(f), oracles.joint_choi(2, f.values), atol=1e-13)


# --- joint_apply ------------------------------------------------------------------------


def test_joint_apply_examples(rng):
    d = 3
    c = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    out = compat.joint_apply(compat.depolarizing_joint(d), c)
    assert np.allclose(out, np.trace(c) / d**2 * np.eye(d))
    f = compat.joint_fn_from_kernel(random_probs(d, rng), random_kernel(d, rng))
    sp = channel.space(d)
    g, h = 4, 7
    out = compat.joint_apply(f, np.kron(sp.weyl[g], sp.weyl[h]))
    assert np.allclose(out, f.values[g, h] * sp.weyl[sp.add_table[g, h]])
    assert np.allclose(compat.joint_apply(f, np.eye(9)), np.eye(3), atol=1e-12)


def test_joint_apply_matches_oracle_and_margins(rng):
    d = 2
    p1 = random_probs(d, rng)
    k = random_kernel(d, rng)
    f = compat.joint_fn_from_kernel(p1, k)
    c = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.allclose(compat.joint_apply(f, c), oracles.joint_heisenberg(d, f.values, c), atol=1e-13)
    b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    ch1 = channel.CovChannel(d, p1)
    ch2 = channel.CovChannel(d, compat.forward_map(p1, k))
    assert np.allclose(compat.joint_apply(f, np.kron(b, np.eye(2))), channel.apply(ch1, b), atol=1e-12)
    assert np.allclose(compat.joint_apply(f, np.kron(np.eye(2), b)), channel.apply(ch2, b), atol=1e-12)


def test_joint_apply_rejects_non_member():
    with pytest.raises(NonMember):
        compat.joint_apply(compat.symplectic_joint(2), np.eye(4))
    with pytest.raises(DimensionMismatch):
        compat.joint_apply(compat.depolarizing_joint(2), np.eye(3))


# --- feasibility ------------------------------------------------------------------------


def test_feasibility_extremes():
    d0, u = channel.delta(2).p, channel.uniform(2).p
    v = compat.feasibility(d0, u)
    assert v.status == compat.FEASIBLE and v.residual <= 1e-7
    v = compat.feasibility(d0, d0)
    assert v.status == compat.INFEASIBLE and v.gap >= 1e-5
    assert v.kernel is None


def test_feasibility_symmetric_noise():
    p = channel.noise_mix(0, 1 / 3, 2).p
    assert compat.feasibility(p, p).status == compat.FEASIBLE
    p = channel.noise_mix(0, 0.3, 2).p
    assert compat.feasibility(p, p).status == compat.INFEASIBLE


def test_feasibility_errors(monkeypatch):
    with pytest.raises(DimensionMismatch):
        compat.feasibility(np.full(4, 0.25), np.full(9, 1 / 9))
    with pytest.raises(ParamOutOfRange):
        compat.feasibility(np.full(36, 1 / 36), np.full(36, 1 / 36))
    with pytest.raises(ParamOutOfRange):
        compat.FeasibilityOptions(feas_tol=0)
    monkeypatch.setenv("WEYLCOMP_CAP_D", "6")
    v = compat.feasibility(np.full(36, 1 / 36), channel.delta(6).p)
    assert v.status == compat.FEASIBLE


def _certified(v, p1, p2):
    k = v.kernel
    defects = k.defects()
    assert defects["min_eig"] >= -1e-8 and defects["diagonal"] <= 1e-9 and defects["hermitian"] <= 1e-9
    assert np.max(np.abs(compat.forward_map(p1, k) - p2)) <= 1e-7


@settings(max_examples=20)
@given(st.sampled_from([2, 3]), seeds)
def test_certificates_and_joints(d, seed):
    rng = np.random.default_rng(seed)
    p1 = random_probs(d, rng)
    p2 = compat.forward_map(p1, random_kernel(d, rng))
    v = compat.feasibility(p1, p2)
    assert v.status == compat.FEASIBLE
    _certified(v, p1, p2)
    f = compat.joint_fn_from_kernel(p1, v.kernel)
    assert compat.csz_membership(f).min_eig >= -1e-8
    m1, m2 = compat.margins_of_joint(f)
    assert np.max(np.abs(channel.from_char(m1).p - p1)) < 1e-8
    assert np.max(np.abs(channel.from_char(m2).p - p2)) < 1e-7
    assert cxmat.min_eig(compat.joint_choi(f)) >= -1e-8


def test_support_pinning():
    p1 = np.array([0.5, 0.5, 0.0, 0.0])
    v = compat.feasibility(p1, channel.uniform(2).p)
    assert v.status == compat.FEASIBLE
    beta = v.kernel.beta
    assert np.allclose(beta[2:, 2:], np.eye(2)) and np.allclose(beta[:2, 2:], 0)


@settings(max_examples=8)
@given(st.sampled_from([2, 3]), seeds, st.integers(0, 80), st.integers(0, 80))
def test_translation_invariance(d, seed, k1, k2):
    rng = np.random.default_rng(seed)
    n = d * d
    a = channel.CovChannel(d, random_probs(d, rng))
    b = channel.CovChannel(d, random_probs(d, rng))
    base = compat.feasibility(a, b).status
    moved = compat.feasibility(channel.shift(a, k1 % n), channel.shift(b, k2 % n)).status
    assert base == moved


@settings(max_examples=10)
@given(seeds, st.floats(0, 1))
def test_monotone_under_depolarizing_noise(seed, lam):
    rng = np.random.default_rng(seed)
    p1 = random_probs(2, rng)
    p2 = compat.forward_map(p1, random_kernel(2, rng))
    noisy = (1 - lam) * p2 + lam * channel.uniform(2).p
    assert compat.feasibility(p1, noisy).status == compat.FEASIBLE


# --- closed forms -----------------------------------------------------------------------


def test_noise_boundary_examples():
    assert compat.noise_boundary(2, 0.0) == pytest.approx(1.0)
    assert compat.noise_boundary(3, 0.0) == pytest.approx(1.0)
    assert compat.noise_boundary(2, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert compat.noise_boundary(2, 1 / 3) == pytest.approx(1 / 3)
    for d in (2, 3, 5):
        t = d / (2 * (d + 1))
        assert compat.noise_boundary(d, t) == pytest.approx(t)
    with pytest.raises(ParamOutOfRange):
        compat.noise_boundary(2, -0.1)


@given(st.integers(2, 9), st.floats(0, 1))
def test_noise_boundary_is_margin_zero(d, s):
    t = compat.noise_boundary(d, s)
    assert 0 <= t <= 1
    assert abs(compat.noise_margin(d, s, t)) < 1e-12


def test_qubit_examples(rng):
    d0, u = channel.delta(2).p, channel.uniform(2).p
    v = compat.qubit_feasibility(d0, u)
    assert v.status == compat.FEASIBLE and np.allclose(v.params, 0, atol=1e-6)
    for _ in range(5):
        p2 = random_probs(2, rng)
        assert compat.qubit_feasibility(d0, p2).status == compat.INFEASIBLE
    v = compat.qubit_feasibility(u, u)
    assert v.status == compat.FEASIBLE and v.margin == pytest.approx(0.25, abs=1e-6)
    with pytest.raises(WrongDimension):
        compat.qubit_feasibility(np.full(9, 1 / 9), np.full(9, 1 / 9))


@settings(max_examples=20)
@given(seeds)
def test_qubit_agrees_with_solver(seed):
    rng = np.random.default_rng(seed)
    p1, p2 = random_probs(2, rng, 0.7), random_probs(2, rng, 0.7)
    q = compat.qubit_feasibility(p1, p2)
    if abs(q.margin) > 1e-3:
        assert q.status == compat.feasibility(p1, p2).status


# --- multipartite -------------------------------------------------------------------------


def test_multipartite_examples(rng):
    v = np.zeros((4, 4, 4))
    v[0, 0, 0] = 1
    assert compat.multipartite_membership(v, 2, 3).is_member
    assert not compat.multipartite_membership(np.ones((4, 4)), 2, 2).is_member
    with pytest.raises(SizeCap):
        compat.multipartite_membership(np.ones((9,) * 4), 3, 4)
    with pytest.raises(DimensionMismatch):
        compat.multipartite_membership(np.ones((4, 4)), 2, 3)
    with pytest.raises(ParamOutOfRange):
        compat.multipartite_membership(np.ones(4), 2, 1)


def test_multipartite_agrees_for_two_parties(rng):
    agree = 0
    for i in range(50):
        f = compat.joint_fn_from_kernel(random_probs(2, rng), random_kernel(2, rng)).values
        if i % 2:
            f = f * np.exp(1j * rng.normal(scale=0.5, size=f.shape))
            f[0, 0] = 1
        a = compat.csz_membership(JointFn(2, f), witness=False)
        b = compat.multipartite_membership(f, 2, 2)
        agree += a.is_member == b.is_member
        assert a.min_eig == pytest.approx(b.min_eig, abs=1e-12)
    assert agree == 50


def test_three_party_product_of_deltas():
    # every party the identity channel would be a three-fold cloner
    assert not compat.multipartite_membership(np.ones((4, 4, 4)), 2, 3).is_member


def test_verdict_json_round_trip():
    v = compat.feasibility(channel.delta(2).p, channel.uniform(2).p)
    doc = v.to_json()
    assert doc["status"] == "feasible"
    beta = compat.complex_matrix_from_json(doc["kernel"])
    assert np.allclose(beta, v.kernel.beta)


@pytest.mark.parametrize("d", [2, 3])
def test_constraint_operator(d, rng):
    # rows of the assembled operator reproduce the diagonal and the forward map
    p1 = random_probs(d, rng)
    aff = compat._AffineKernelSet(p1, channel.uniform(d).p)
    x = cxmat.random_hermitian(d * d, rng)
    got = aff.matrix @ aff.coords.to_vec(x)
    assert np.allclose(got[: d * d], np.diag(x).real)
    assert np.allclose(got[d * d:], aff.forward(x))
    assert np.allclose(aff.coords.to_mat(aff.coords.to_vec(x)), x)
    y = aff.project(x)
    assert np.allclose(aff.project(y), y)
    assert aff.residual(y) < 1e-12
