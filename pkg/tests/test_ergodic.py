import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncergodic.ergodic import (
    AverageSpec,
    ErgodicError,
    FiniteGroupAction,
    ball,
    ball_average_action,
    cesaro_average,
    cyclic_group,
    exponential_flow,
    folner_ratio,
    random_unitary,
    scalar_oracle_sqfn,
    semigroup_average,
    square_function_norm,
    sup_square_function,
    sweep,
    transference_identity_check,
    translation_action,
    tuple_average,
)
from ncergodic.opalg import DomainError, RCInterval, ResourceError

P3 = np.roll(np.eye(3), 1, axis=0)
FLIP = np.diag([1.0, -1.0])
E2 = np.array([0.0, 1.0])


# ---------------------------------------------------------------- averages


def test_cesaro_examples():
    assert np.allclose(cesaro_average(P3, 3), np.full((3, 3), 1 / 3))
    assert np.allclose(cesaro_average(np.eye(4), 7), np.eye(4))
    assert np.allclose(cesaro_average(FLIP, 2), np.diag([1.0, 0.0]))


def test_symmetric_average():
    assert np.allclose(cesaro_average(P3, 1, "symmetric"), np.full((3, 3), 1 / 3))
    with pytest.raises(ErgodicError):
        cesaro_average(np.diag([1.0, 0.0]), 2, "symmetric")
    with pytest.raises(DomainError):
        cesaro_average(P3, 2, "sideways")


@pytest.mark.parametrize("q", [2, 3, 5, 8])
def test_mean_ergodic_limit_at_period(q):
    rng = np.random.default_rng(q)
    eig = np.exp(2j * np.pi * rng.integers(0, q, 6) / q)
    eig[0] = 1.0
    u = random_unitary(6, rng)
    T = u @ np.diag(eig) @ u.conj().T
    fixed = u[:, np.isclose(eig, 1)]
    assert np.allclose(cesaro_average(T, q), fixed @ fixed.conj().T, atol=1e-12)


def test_tuple_average_examples():
    assert np.allclose(tuple_average([np.eye(2), np.eye(2)], 5), np.eye(2))
    Q = P3 @ P3
    assert np.allclose(tuple_average([P3, Q], 3), cesaro_average(P3, 3) @ cesaro_average(Q, 3))
    assert np.allclose(tuple_average([P3], 4), cesaro_average(P3, 4))
    with pytest.raises(ErgodicError, match="0 and 1"):
        tuple_average([P3, np.eye(3)[[1, 0, 2]]], 2)


# ---------------------------------------------------------------- semigroups


def test_semigroup_exponential():
    alpha, exact = exponential_flow([1.0])
    # frozen from a quadrature oracle
    assert exact(1.0)[0, 0] == pytest.approx(0.6321205588285577, abs=1e-15)
    riemann = {4: 0.7144244988812634, 8: 0.672450953137265, 16: 0.652080081307892, 32: 0.6420488838257687}
    res = []
    for k, v in riemann.items():
        s = semigroup_average(alpha, 1.0, k, exact=exact)
        assert s.n == k
        assert s.average[0, 0].real == pytest.approx(v, abs=1e-13)
        res.append(s.residual)
    assert all(b < a for a, b in zip(res, res[1:]))


def test_semigroup_identity_and_product():
    for k in (2, 5):
        assert np.allclose(semigroup_average(lambda s: np.eye(2), 1.5, k).average, np.eye(2))
    th = np.array([0.7, 1.3])

    def alpha(s):
        return np.diag(np.exp(1j * th * np.asarray(s)))

    s1 = semigroup_average(alpha, 1.0, 6, d=2)
    Ts = [alpha((1 / 6, 0)), alpha((0, 1 / 6))]
    assert np.allclose(s1.average, tuple_average(Ts, 6))


def test_semigroup_rejects_short_time():
    with pytest.raises(DomainError):
        semigroup_average(lambda s: np.eye(1), 0.1, 2)


# ---------------------------------------------------------------- square functions


def test_average_spec_validation():
    with pytest.raises(DomainError):
        AverageSpec("one-sided", (2, 1))
    with pytest.raises(DomainError):
        AverageSpec("two-sided", (1, 2))
    with pytest.raises(DomainError):
        square_function_norm(E2, FLIP, [1], 2)


def test_square_function_examples():
    assert square_function_norm(E2, FLIP, [1, 2], 2) == pytest.approx(1.0)
    fixed = np.array([1.0, 0.0])
    assert square_function_norm(fixed, FLIP, [1, 3, 4], 2) == 0.0
    iv = square_function_norm(E2, FLIP, [1, 2], 1.5)
    assert isinstance(iv, RCInterval) and 1.0 in iv


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.lists(st.integers(1, 12), min_size=2, max_size=5, unique=True),
       st.integers(0, 10 ** 6))
def test_hilbert_case_is_l2_sum(d, idx, seed):
    rng = np.random.default_rng(seed)
    T = random_unitary(d, rng)
    x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    idx = sorted(idx)
    avgs = {n: cesaro_average(T, n) @ x for n in idx}
    expect = np.sqrt(sum(np.sum(np.abs(avgs[b] - avgs[a]) ** 2) for a, b in zip(idx, idx[1:])))
    assert square_function_norm(x, T, idx, 2) == pytest.approx(expect, rel=1e-10, abs=1e-12)


def test_scalar_oracle_examples():
    assert scalar_oracle_sqfn([1.0], [3.0], [1, 2, 5]) == 0.0
    assert scalar_oracle_sqfn([-1.0], [2.0], [1, 2]) == pytest.approx(np.sqrt(2.0))
    assert scalar_oracle_sqfn([1j, -1.0], [0.0, 0.0], [1, 4]) == 0.0
    with pytest.raises(DomainError):
        scalar_oracle_sqfn([0.5], [1.0], [1, 2])
    with pytest.raises(DomainError):
        scalar_oracle_sqfn([1.0], [1.0], [1, 2], p=3)


def test_scalar_oracle_matches_matrix_computation():
    rng = np.random.default_rng(0)
    for _ in range(20):
        d = int(rng.integers(1, 6))
        t = np.exp(2j * np.pi * rng.random(d))
        x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        idx = sorted(rng.choice(np.arange(1, 15), size=4, replace=False).tolist())
        lhs = square_function_norm(x, np.diag(t), idx, 2)
        assert lhs == pytest.approx(scalar_oracle_sqfn(t, np.abs(x) ** 2, idx), rel=1e-10, abs=1e-12)


def test_sup_examples():
    r = sup_square_function(np.array([1.0, 2.0]), np.eye(2), 2, 6)
    assert r.value == 0.0
    r = sup_square_function(E2, FLIP, 2, 2)
    assert r.value == pytest.approx(1.0) and r.subsequence == (1, 2)
    with pytest.raises(ResourceError):
        sup_square_function(E2, FLIP, 2, 15)
    with pytest.raises(DomainError):
        sup_square_function(E2, FLIP, 2, 5, mode="random")


def test_greedy_is_a_lower_bound():
    rng = np.random.default_rng(1)
    agree = 0
    for _ in range(20):
        T = random_unitary(3, rng)
        x = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        ex = sup_square_function(x, T, 2, 8)
        gr = sup_square_function(x, T, 2, 8, mode="greedy")
        assert gr.lower_bound
        assert gr.value <= ex.value * (1 + 1e-12)
        agree += np.isclose(gr.value, ex.value, rtol=1e-9)
    assert agree >= 1


def test_sup_matches_brute_force_over_subsequences():
    import itertools

    rng = np.random.default_rng(2)
    T = random_unitary(2, rng)
    x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    Tc = np.kron(T, T.conj())
    best = 0.0
    for k in range(2, 6):
        for seq in itertools.combinations(range(1, 6), k):
            best = max(best, square_function_norm(x, Tc, seq, 3))
    assert sup_square_function(x, Tc, 3, 5).value == pytest.approx(best, rel=1e-10)


def test_sup_interval_below_two():
    rng = np.random.default_rng(3)
    T = random_unitary(2, rng)
    r = sup_square_function(rng.standard_normal(2), T, 1.5, 5)
    lo, hi = r.interval
    assert lo <= hi and hi == r.value


# ---------------------------------------------------------------- groups


def test_group_table_and_ball():
    act = translation_action(5)
    assert act.identity == 0
    assert ball(act, 1) == [1, 4]
    assert ball(act, 2) == [0, 1, 2, 3, 4]
    act9 = translation_action(9)
    for n in range(2, 6):
        assert ball(act9, n) == sorted({k % 9 for k in range(-n, n + 1)})


def test_ball_average_examples():
    act = translation_action(5)
    x = np.array([1.0, 0, 0, 0, 0])
    # frozen from direct enumeration of the two translates
    assert np.allclose(ball_average_action(act, 1, x), [0, 0.5, 0, 0, 0.5])
    act6 = translation_action(6)
    y = np.arange(6.0)
    assert np.allclose(ball_average_action(act6, 3, y), np.full(6, y.mean()))
    trivial = FiniteGroupAction(cyclic_group(4), (1, 3), [np.eye(2)] * 4)
    assert np.allclose(ball_average_action(trivial, 2, np.array([1.0, 2.0])), [1.0, 2.0])


def test_action_validation():
    with pytest.raises(ErgodicError):
        FiniteGroupAction(cyclic_group(5), (1,), [np.eye(1)] * 5)
    with pytest.raises(ErgodicError):
        FiniteGroupAction(cyclic_group(2), (1,), [np.eye(1), 2 * np.eye(1)])


def test_folner_examples():
    q = 7
    assert folner_ratio(range(q), 3, lambda a, b: (a + b) % q) == 0.0
    for n in (1, 4, 10):
        assert folner_ratio(range(-n, n + 1), 1) == pytest.approx(2 / (2 * n + 1))
    assert folner_ratio([0], 1) == 2.0
    with pytest.raises(DomainError):
        folner_ratio([], 1)


def test_folner_decreases_with_radius():
    q = 101
    vals = [folner_ratio(ball(translation_action(q), r), 1, lambda a, b: (a + b) % q) for r in (2, 5, 10, 20)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_transference_examples():
    trivial = FiniteGroupAction(cyclic_group(3), (1, 2), [np.eye(2)] * 3)
    assert transference_identity_check(trivial, np.array([1.0, 2.0]), 1, 1).residual == 0.0
    act = translation_action(6, 2)
    rng = np.random.default_rng(0)
    x = rng.standard_normal(6 * 4)
    for h in range(6):
        for r in (1, 2, 3):
            res = transference_identity_check(act, x, r, h)
            assert res.covered and res.residual < 1e-12
    small = transference_identity_check(act, x, 2, 3, region=[0, 1])
    assert not small.covered and small.residual > 1e-3


# ---------------------------------------------------------------- sweeps


def test_sweep_shapes():
    rows, summary = sweep({"p": [2], "dims": [2], "n_max": [4, 5], "trials": 3, "seed": 1})
    assert len(rows) == 6
    assert set(summary) == {(2.0, 2, 4), (2.0, 2, 5)}
    assert summary[(2.0, 2, 5)] >= summary[(2.0, 2, 4)] - 1e-12
    rows, _ = sweep({"p": [2], "dims": [3], "n_max": 4, "trials": 2, "model": "tuple"})
    assert {r["dim"] for r in rows} == {3}
    with pytest.raises(DomainError):
        sweep({"model": "other", "trials": 1})
