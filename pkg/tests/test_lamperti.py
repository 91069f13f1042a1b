import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncergodic.lamperti import (
    JordanDescriptor,
    LampertiError,
    ModulusPower,
    is_lamperti,
    lamperti_compose,
    lamperti_decompose,
    lamperti_from_json,
    lamperti_modulus,
    lamperti_power_mu,
    lamperti_to_json,
    make_lamperti,
    operator_pnorm,
    weighted_permutation,
    weighted_permutation_norm,
)
from ncergodic.opalg import DomainError, TraceContext, map_matrix, modulus

SWAP = (1, 0)


def diag_apply(T, f):
    return np.diag(T(np.diag(np.asarray(f, dtype=complex))))


def example():
    # T f(0) = -2 f(1), T f(1) = 3 f(0)
    return make_lamperti(np.diag([-1.0, 1.0]), np.diag([2.0, 3.0]),
                         JordanDescriptor("point-permutation", pi=SWAP))


def random_wp(rng, d, weighted=False):
    b = rng.uniform(0.2, 3.0, d)
    pi = rng.permutation(d)
    ph = np.exp(2j * np.pi * rng.random(d))
    ctx = TraceContext(d, rng.uniform(0.5, 2.0, d)) if weighted else None
    return weighted_permutation(b, pi, ph, ctx)


def random_unitary(rng, d):
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# ---------------------------------------------------------------- construction


def test_make_identity():
    T = make_lamperti(np.eye(3), np.eye(3), JordanDescriptor.identity(3))
    x = np.arange(9.0).reshape(3, 3)
    assert np.allclose(T(x), x)


def test_make_example_matches_oracle():
    T = example()
    # frozen from the symbolic product w b P
    assert np.allclose(T.diagonal_matrix(), [[0, -2], [3, 0]])
    assert np.allclose(diag_apply(T, [5.0, 7.0]), [-14.0, 15.0])


def test_make_rejects_support_mismatch():
    with pytest.raises(LampertiError, match="support condition"):
        make_lamperti(np.eye(2), np.diag([1.0, 0.0]), JordanDescriptor.identity(2))


def test_make_rejects_noncommuting_weight():
    b = np.array([[2.0, 1.0], [1.0, 2.0]])
    with pytest.raises(LampertiError, match="commutation condition"):
        make_lamperti(np.eye(2), b, JordanDescriptor.identity(2))


def test_jordan_descriptor_validation():
    with pytest.raises(LampertiError):
        JordanDescriptor("point-permutation", pi=(0, 0))
    with pytest.raises(LampertiError):
        JordanDescriptor("conjugation", u=np.ones((2, 2)))
    with pytest.raises(LampertiError):
        JordanDescriptor("rotation", u=np.eye(2))


def test_transpose_conjugation_is_not_multiplicative():
    J = JordanDescriptor("transpose-conjugation", u=np.eye(2))
    a, b = np.array([[0, 1], [0, 0.0]]), np.array([[0, 0], [1, 0.0]])
    assert not np.allclose(J(a @ b), J(a) @ J(b))
    assert np.allclose(J(a @ b + b @ a), J(a) @ J(b) + J(b) @ J(a))


# ---------------------------------------------------------------- detection


def test_is_lamperti_examples():
    rng = np.random.default_rng(0)
    T = random_wp(rng, 4)
    assert is_lamperti(T.diagonal_matrix(), 4, algebra="diagonal")
    d = 3
    avg = map_matrix(lambda x: np.trace(x) / d * np.eye(d), d)
    res = is_lamperti(avg, d)
    assert not res.ok
    e, f = res.witness
    assert np.allclose(e, np.diag([1, 0, 0])) and np.allclose(f, np.diag([0, 1, 0]))
    u = random_unitary(rng, d)
    conj = map_matrix(lambda x: u @ x @ u.conj().T, d)
    assert is_lamperti(conj, d, strict=True)


def test_constructed_operators_are_lamperti():
    rng = np.random.default_rng(1)
    for _ in range(10):
        assert is_lamperti(random_wp(rng, 5), 5, algebra="diagonal")
        u = random_unitary(rng, 3)
        T = make_lamperti(np.eye(3), 2.5 * np.eye(3), JordanDescriptor("transpose-conjugation", u=u))
        assert is_lamperti(T, 3, budget=16)


def test_is_lamperti_uses_the_operator_algebra():
    T = random_wp(np.random.default_rng(2), 4)
    assert is_lamperti(T, 4)
    assert is_lamperti(lamperti_modulus(T), 4)
    assert not is_lamperti(T, 4, algebra="full")


# ---------------------------------------------------------------- decomposition


def test_decompose_example():
    T = lamperti_decompose(np.array([[0, -2], [3, 0]]), 2)
    assert np.allclose(T.w, np.diag([-1, 1]))
    assert np.allclose(T.b, np.diag([2, 3]))
    assert T.J.pi == SWAP


def test_decompose_identity_and_zero():
    T = lamperti_decompose(np.eye(3), 3)
    assert np.allclose(T.w, np.eye(3)) and np.allclose(T.b, np.eye(3)) and T.J.pi == (0, 1, 2)
    Z = lamperti_decompose(np.zeros((2, 2)), 2)
    assert np.allclose(Z.w, 0) and np.allclose(Z.b, 0)
    assert np.allclose(Z.J.unit(), 0)


def test_decompose_rejects_spreading_map():
    with pytest.raises(LampertiError):
        lamperti_decompose(np.ones((2, 2)), 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10 ** 6))
def test_decompose_reconstructs(d, seed):
    rng = np.random.default_rng(seed)
    T = random_wp(rng, d)
    R = lamperti_decompose(T.diagonal_matrix(), d)
    assert np.allclose(R.diagonal_matrix(), T.diagonal_matrix(), atol=1e-10)


# ---------------------------------------------------------------- modulus


def test_modulus_example():
    M = lamperti_modulus(example())
    assert np.allclose(diag_apply(M, [5.0, 7.0]), [14.0, 15.0])
    assert M.is_positive
    assert np.allclose(lamperti_modulus(M).diagonal_matrix(), M.diagonal_matrix())


def test_modulus_identities_full_algebra():
    rng = np.random.default_rng(2)
    u = random_unitary(rng, 3)
    T = make_lamperti(random_unitary(rng, 3) @ u @ u.conj().T, 1.7 * np.eye(3),
                      JordanDescriptor("conjugation", u=u))
    M = lamperti_modulus(T)
    for _ in range(20):
        x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        a, b, c = modulus(T(x)), modulus(M(x)), M(modulus(x))
        assert np.allclose(a, b, atol=1e-9) and np.allclose(b, c, atol=1e-9)


# ---------------------------------------------------------------- composition


def test_compose_example():
    S = weighted_permutation([2.0, 3.0], SWAP)
    C = lamperti_compose(S, S)
    assert np.allclose(C.b, np.diag([6.0, 6.0]))
    assert C.J.pi == (0, 1)
    assert np.allclose(diag_apply(C, [1.0, -4.0]), [6.0, -24.0])


def test_compose_identity_and_associativity():
    rng = np.random.default_rng(3)
    R, S, T = (random_wp(rng, 4) for _ in range(3))
    I = weighted_permutation(np.ones(4), range(4))
    assert np.allclose(lamperti_compose(T, I).diagonal_matrix(), T.diagonal_matrix())
    left = lamperti_compose(lamperti_compose(R, S), T)
    right = lamperti_compose(R, lamperti_compose(S, T))
    assert np.allclose(left.diagonal_matrix(), right.diagonal_matrix())


def test_compose_requires_full_support():
    S = weighted_permutation([2.0, 0.0], SWAP)
    with pytest.raises(LampertiError):
        lamperti_compose(S, S)


@pytest.mark.parametrize("q", [2, 3, 5, 12])
def test_cyclic_cocycle_closes(q):
    # powers of two with product one make every product exact in binary64
    exps = np.arange(q) - (q - 1) / 2
    exps = np.round(exps).astype(int)
    exps[-1] -= exps.sum()
    T1 = weighted_permutation(2.0 ** exps, [(i + 1) % q for i in range(q)])
    I = weighted_permutation(np.ones(q), range(q))
    reps = [I]
    for _ in range(1, q):
        reps.append(lamperti_compose(reps[-1], T1))
    assert np.array_equal(lamperti_compose(reps[-1], T1).b, I.b)
    for g in range(q):
        for h in range(q):
            gh = (g + h) % q
            assert np.array_equal(reps[g].b @ reps[g].J(reps[h].b), reps[gh].b)
            assert reps[g].J.compose(reps[h].J).pi == reps[gh].J.pi


# ---------------------------------------------------------------- mu powers and norms


def test_power_mu_examples():
    T = weighted_permutation([2.0, 3.0], SWAP)
    T2 = lamperti_power_mu(T, ModulusPower.from_p_gamma(4, 2))
    assert np.allclose(T2.b, np.diag([4.0, 9.0]))
    assert T2.J.pi == SWAP
    assert np.allclose(lamperti_power_mu(T, 1.0).diagonal_matrix(), T.diagonal_matrix())
    with pytest.raises(DomainError):
        lamperti_power_mu(example(), 2.0)


def test_power_mu_norm_relation():
    # frozen sphere-search oracle: ||T||_4 = 3 and ||T^(2)||_2 = 9 = 3^mu
    T = weighted_permutation([2.0, 3.0], SWAP)
    mp = ModulusPower.from_p_gamma(4, 2)
    Tm = lamperti_power_mu(T, mp)
    a = operator_pnorm(T, 4)
    b = operator_pnorm(Tm, 2)
    assert a == pytest.approx(3.0, abs=1e-6)
    assert b == pytest.approx(9.0, abs=1e-6)
    assert b == pytest.approx(a ** mp.mu, rel=1e-6)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 4.0])
def test_operator_pnorm_examples(p):
    # frozen sphere-search oracle: 3 for every p
    assert operator_pnorm(weighted_permutation([2.0, 3.0], SWAP), p) == pytest.approx(3.0, abs=1e-6)
    assert operator_pnorm(np.eye(4), p, dim=2) == pytest.approx(1.0, abs=1e-6)
    assert operator_pnorm(np.zeros((4, 4)), p, dim=2) == 0.0


def test_weighted_closed_form_under_weighted_trace():
    ctx = TraceContext(2, [1.0, 4.0])
    T = weighted_permutation([2.0, 3.0], SWAP, ctx=ctx)
    for p in (1.0, 2.0, 3.0):
        expect = max(2.0 * (1 / 4) ** (1 / p), 3.0 * 4 ** (1 / p))
        assert weighted_permutation_norm(T, p) == pytest.approx(expect)
        assert operator_pnorm(T, p) == pytest.approx(expect, rel=1e-6)


def test_trace_inequality_for_positive_lamperti():
    rng = np.random.default_rng(5)
    for p in (1.0, 2.0, 3.0):
        T = random_wp(rng, 5, weighted=True)
        C = weighted_permutation_norm(T, p)
        for _ in range(50):
            x = np.diag(rng.uniform(0, 2, 5))
            lhs = T.ctx.trace(np.linalg.matrix_power(T.b, int(p)) @ T.J(x))
            assert lhs.real <= C ** p * T.ctx.trace(x).real * (1 + 1e-10)


# ---------------------------------------------------------------- JSON


def test_json_round_trip():
    rng = np.random.default_rng(4)
    T = random_wp(rng, 4, weighted=True)
    R = lamperti_from_json(lamperti_to_json(T))
    assert np.allclose(R.diagonal_matrix(), T.diagonal_matrix())
    assert R.ctx == T.ctx
    u = random_unitary(rng, 2)
    F = make_lamperti(np.eye(2), np.eye(2), JordanDescriptor("conjugation", u=u))
    G = lamperti_from_json(lamperti_to_json(F))
    assert np.allclose(G.matrix(), F.matrix())
    with pytest.raises(DomainError):
        lamperti_from_json({"w": {}})
