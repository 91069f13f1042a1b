import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncergodic.harmonic import (
    DyadicError,
    FiniteMetricSpace,
    OperatorField,
    SpaceError,
    annular_decay_fit,
    boundary_layer_ratio,
    build_dyadic_system,
    conditional_expectation,
    cuculescu,
    cz_decompose,
    doubling_constant,
    estimate_sqfn_constants,
    hl_average,
    hl_operator_norms,
    long_operator,
    refined_radii,
    space_from_json,
    split_intervals,
    two_cluster,
    verify_dyadic_system,
    z2_box,
    z_interval,
    zeta_projection,
)
from ncergodic.opalg import DomainError


def two_point():
    sp = z_interval(2)
    return sp, build_dyadic_system(sp), OperatorField(sp, [0.5, 1.5])


def single_scale(n):
    return FiniteMetricSpace(tuple(range(n)), 1.0 - np.eye(n))


# ---------------------------------------------------------------- spaces


def test_space_validation():
    with pytest.raises(SpaceError, match="triangle"):
        FiniteMetricSpace((0, 1, 2), [[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    with pytest.raises(SpaceError):
        FiniteMetricSpace((0, 1), [[0, 1], [2, 0]])
    with pytest.raises(SpaceError):
        FiniteMetricSpace((0, 1), [[0, 0], [0, 0]])
    with pytest.raises(SpaceError):
        FiniteMetricSpace((0, 1), [[0, 1], [1, 0]], weights=[1.0, 0.0])


def test_space_json_and_generators():
    sp = space_from_json({"kind": "z-interval", "n": 5, "start": -2})
    assert sp.points == (-2, -1, 0, 1, 2)
    box = space_from_json({"kind": "z2-box", "width": 3, "height": 2, "metric": "linf"})
    assert box.n == 6 and box.diameter == 2.0
    assert z2_box(3, 2).diameter == 3.0
    tc = space_from_json({"kind": "two-cluster", "size": 3, "gap": 10})
    assert tc.diameter == 14.0
    raw = space_from_json({"points": 2, "dist": [[0, 2], [2, 0]], "weights": [1, 3]})
    assert raw.total_mass == 4.0
    with pytest.raises(SpaceError):
        space_from_json({"kind": "sphere"})
    with pytest.raises(SpaceError):
        space_from_json({"kind": "z-interval"})


def test_radius_grid_is_distances_and_midpoints():
    assert np.allclose(z_interval(4).radius_grid(), [1, 1.5, 2, 2.5, 3])
    assert np.allclose(z_interval(4).radius_grid(lo=1.5, hi=2.5), [2, 2.5])


def test_doubling_examples():
    assert doubling_constant(z_interval(1)).D == 1
    # frozen from an exhaustive minimal-cover oracle on {0..7}
    cert = doubling_constant(z_interval(8))
    assert cert.D == 3
    sp = z_interval(8)
    covered = np.zeros(sp.n, bool)
    for c in cert.cover:
        covered |= sp.ball(c, cert.radius / 2)
    assert np.all(covered[sp.ball(cert.center, cert.radius)])
    assert doubling_constant(two_cluster(8, 100.0)).D <= cert.D


def test_annular_examples():
    assert annular_decay_fit(z_interval(1), 1.0, 1.0).K == 0.0
    sp = z_interval(33, start=-16)
    # frozen from a brute-force oracle on the distance-plus-midpoint grid
    expect = {1.0: 2.0, 0.5: 4 / 3, 0.25: 4 / 3}
    fits = {e: annular_decay_fit(sp, e, 1.0).K for e in expect}
    for e, k in expect.items():
        assert fits[e] == pytest.approx(k, rel=1e-12)
    assert fits[1.0] <= 4.0
    assert fits[0.25] <= fits[0.5] <= fits[1.0]
    with pytest.raises(SpaceError):
        annular_decay_fit(sp, 1.5, 1.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 20), st.integers(0, 10 ** 6))
def test_annular_monotone_in_eps(n, seed):
    sp = z_interval(n, weights="random", seed=seed)
    ks = [annular_decay_fit(sp, e, 1.0).K for e in (0.2, 0.5, 0.8, 1.0)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(ks, ks[1:]))


def test_hl_operator_norm_bounds():
    for sp in (z_interval(16), z_interval(12, weights="random", seed=1), z2_box(4, 4), two_cluster(5, 7.0)):
        D = doubling_constant(sp).D
        for r in sp.radius_grid():
            one, inf = hl_operator_norms(sp, r)
            assert one <= D * (1 + 1e-12)
            assert inf == pytest.approx(1.0)


# ---------------------------------------------------------------- dyadic


def test_dyadic_parameter_check():
    with pytest.raises(DyadicError):
        build_dyadic_system(z_interval(4), delta=2.0, c0=0.5, C0=1.0)
    with pytest.raises(DyadicError):
        build_dyadic_system(z_interval(4), delta=40.0, c0=1.0, C0=0.9)


@pytest.mark.parametrize("sp", [z_interval(64), z_interval(500), z2_box(12, 12),
                                two_cluster(30, 200.0), z_interval(40, weights="random", seed=3)],
                         ids=["z64", "z500", "box", "clusters", "weighted"])
def test_dyadic_properties_hold(sp):
    sys_ = build_dyadic_system(sp)
    checks = verify_dyadic_system(sys_)
    assert [c.name for c in checks] == ["net", "partition", "nesting", "parent", "sandwich"]
    assert all(c.ok for c in checks), checks
    assert sys_.n_cubes(sys_.top) == 1
    assert sys_.n_cubes(sys_.bottom) == sp.n


def test_dyadic_trivial_cases():
    one = build_dyadic_system(z_interval(1))
    assert one.levels == (0,) and all(c.ok for c in verify_dyadic_system(one))
    sp, sys_, _ = two_point()
    k = next(k for k in sys_.levels if sys_.a0 * sys_.delta ** k > 1)
    assert sys_.n_cubes(k) == 1


def test_dyadic_determinism_and_json():
    a = build_dyadic_system(z_interval(50), seed=7)
    b = build_dyadic_system(z_interval(50), seed=7)
    assert a.to_json() == b.to_json()
    js = a.to_json()
    assert js["a0"] == pytest.approx(1 / 3) and js["C1"] == pytest.approx(2.2)
    assert sum(c["mass"] for c in js["generations"][-1]["cubes"]) == 50


def test_boundary_layer_trend():
    sp = z_interval(2000)
    sys_ = build_dyadic_system(sp)
    k = sys_.top - 1
    ratios = [boundary_layer_ratio(sys_, k, L) for L in (1, 2, 3)]
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))


# ---------------------------------------------------------------- expectations and averages


def test_conditional_expectation_example():
    sp = z_interval(4)
    sys_ = build_dyadic_system(sp, delta=20.0)
    f = OperatorField(sp, [1.0, 3.0, 5.0, 7.0])
    # hand-built generation with cubes {0,1}, {2,3}
    lab = np.array([0, 0, 1, 1])
    object.__setattr__(sys_, "labels", {**sys_.labels, 99: lab})
    object.__setattr__(sys_, "centers", {**sys_.centers, 99: np.array([0, 2])})
    assert np.allclose(conditional_expectation(f, sys_, 99).values.ravel(), [2, 2, 6, 6])
    with pytest.raises(KeyError):
        conditional_expectation(f, sys_, 1234)
    top = conditional_expectation(f, sys_, 1234, clamp=True)
    assert np.allclose(top.values.ravel(), 4.0)


def test_conditional_expectation_tower_and_trace():
    rng = np.random.default_rng(0)
    sp = z_interval(120, weights="random", seed=2)
    sys_ = build_dyadic_system(sp)
    f = OperatorField.random(sp, 3, rng)
    assert conditional_expectation(OperatorField.constant(sp, np.eye(3)), sys_, 1).allclose(np.eye(3))
    for k in sys_.levels:
        ek = conditional_expectation(f, sys_, k)
        assert ek.trace() == pytest.approx(f.trace(), rel=1e-12)
        for p in (1, 2, 3):
            assert ek.norm(p) <= f.norm(p) * (1 + 1e-12)
        for j in sys_.levels:
            both = conditional_expectation(ek, sys_, j)
            assert both.allclose(conditional_expectation(f, sys_, max(k, j)), atol=1e-12)


def test_hl_average_examples():
    rng = np.random.default_rng(1)
    sp = z2_box(5, 4, weights="random", seed=4)
    c = OperatorField.constant(sp, [[1, 2j], [-2j, 3]])
    assert hl_average(c, 2.0).allclose(c)
    f = OperatorField.random(sp, 2, rng)
    mean = np.einsum("h,hij->ij", sp.weights, f.values) / sp.total_mass
    assert hl_average(f, sp.diameter).allclose(np.broadcast_to(mean, f.values.shape))
    with pytest.raises(DomainError):
        hl_average(f, 0.0)


def test_hl_average_l1_bound_sweep():
    rng = np.random.default_rng(2)
    sp = z_interval(24, weights="random", seed=5)
    D = doubling_constant(sp).D
    for _ in range(10):
        f = OperatorField.random(sp, 2, rng)
        for r in sp.radius_grid():
            m = hl_average(f, r)
            assert m.norm(1) <= D * f.norm(1) * (1 + 1e-12)
            assert m.norm(np.inf) <= f.norm(np.inf) * (1 + 1e-12)


# ---------------------------------------------------------------- Cuculescu and CZ


def test_cuculescu_two_point_example():
    _, sys_, f = two_point()
    res = cuculescu(f, sys_, 1.0)
    # frozen from the hand recursion
    assert np.allclose(res.q_cubes[sys_.top], 1.0)
    assert np.allclose(res.q.ravel(), [1.0, 0.0])
    assert f.norm(1) == 2.0
    phi = next(c for c in res.checks if c.name.startswith("phi"))
    assert phi.value == 1.0 and phi.bound == pytest.approx(2.0)
    assert res.ok


def test_cuculescu_trivial_and_errors():
    sp = z_interval(30)
    sys_ = build_dyadic_system(sp)
    rng = np.random.default_rng(3)
    f = OperatorField.random(sp, 2, rng, positive=True)
    big = cuculescu(f, sys_, 10 * f.norm(np.inf))
    assert np.allclose(big.q, np.eye(2))
    assert all(np.allclose(p, 0) for p in big.p_cubes.values())
    with pytest.raises(DomainError):
        cuculescu(f - 5 * f.norm(np.inf) * np.eye(2), sys_, 1.0)
    with pytest.raises(DomainError):
        cuculescu(f, sys_, 0.0)


def test_cz_two_point_example():
    _, sys_, f = two_point()
    cz = cz_decompose(f, sys_, 1.0)
    # frozen from direct evaluation of the decomposition
    assert np.allclose(cz.g.values.ravel(), [1.25, 0.75])
    assert np.allclose(cz.b_d.values.ravel(), [-0.75, 0.75])
    assert np.allclose(cz.b_off.values, 0)
    assert cz.g.norm(2) ** 2 == pytest.approx(2.125)
    assert len(cz.checks) == 6 and cz.ok
    js = cz.to_json()
    assert js["bad_cubes"] == [{"k": 0, "cube": 1, "rank_p": 1, "atom_l1": 1.5}]


def test_cz_commutative_and_small_cases():
    sp = z_interval(40)
    sys_ = build_dyadic_system(sp)
    rng = np.random.default_rng(4)
    vals = np.exp(rng.uniform(0, 5, sp.n))
    f = OperatorField(sp, vals)
    cz = cz_decompose(f, sys_, float(vals.mean()) * 2)
    assert cz.ok and np.allclose(cz.b_off.values, 0)
    diag = OperatorField(sp, np.stack([np.diag(rng.uniform(0, 3, 2)) for _ in range(sp.n)]))
    assert np.allclose(cz_decompose(diag, sys_, 1.0).b_off.values, 0)
    small = OperatorField.random(sp, 2, rng, positive=True)
    cz = cz_decompose(small, sys_, 2 * small.norm(np.inf))
    assert cz.g.allclose(small) and np.allclose(cz.b_d.values, 0) and np.allclose(cz.b_off.values, 0)


@pytest.mark.parametrize("seed", range(6))
def test_cz_checks_random_noncommutative(seed):
    rng = np.random.default_rng(seed)
    sp = z_interval(int(rng.integers(16, 48)), weights="random", seed=seed)
    sys_ = build_dyadic_system(sp)
    f = OperatorField.random(sp, 3, rng, positive=True, spiky=True)
    top = np.linalg.norm(conditional_expectation(f, sys_, sys_.top).values[0], 2)
    cz = cz_decompose(f, sys_, top * 10 ** rng.uniform(0, 2))
    assert cz.cuculescu.ok, cz.cuculescu.checks
    assert cz.ok, cz.checks


# ---------------------------------------------------------------- zeta


def test_zeta_two_point_example():
    _, sys_, f = two_point()
    rep = zeta_projection(cz_decompose(f, sys_, 1.0), sys_)
    assert np.allclose(rep.zeta.values.ravel(), [1.0, 0.0])
    assert rep.ok
    assert rep.phi_one_minus_zeta == 1.0
    assert rep.stated_bound_holds


def test_zeta_literal_summed_identity_counterexample():
    # the summed near identity fails on the 2-point example; a sibling atom leaks in
    _, sys_, f = two_point()
    rep = zeta_projection(cz_decompose(f, sys_, 1.0), sys_)
    assert rep.literal_near_summed == pytest.approx(0.75)


def test_zeta_without_bad_cubes():
    sp = z_interval(20)
    sys_ = build_dyadic_system(sp)
    f = OperatorField.random(sp, 2, np.random.default_rng(5), positive=True)
    rep = zeta_projection(cuculescu(f, sys_, 2 * f.norm(np.inf)), sys_)
    assert np.allclose(rep.zeta.values, np.eye(2))
    assert rep.phi_one_minus_zeta == 0.0 and rep.ok


def test_zeta_bound_sweep():
    rng = np.random.default_rng(6)
    held = 0
    for i in range(50):
        sp = z_interval(int(rng.integers(8, 40)))
        sys_ = build_dyadic_system(sp, seed=i)
        f = OperatorField.random(sp, 2, rng, positive=True, spiky=True)
        top = np.linalg.norm(conditional_expectation(f, sys_, sys_.top).values[0], 2)
        rep = zeta_projection(cz_decompose(f, sys_, top * 10 ** rng.uniform(0, 3)), sys_)
        assert rep.ok, rep.checks
        held += rep.stated_bound_holds
    assert held == 50


# ---------------------------------------------------------------- splitting and square functions


def test_split_examples():
    # frozen from a hand application of the splitting rule
    long, short = split_intervals([1.5, 3, 10], 2)
    assert long == [(4.0, 8.0)]
    assert short == [(1.5, 2.0), (2.0, 3), (3, 4.0), (8.0, 10)]
    assert split_intervals([5, 7], 2) == ([], [(5, 7)])
    assert split_intervals([2, 4], 2) == ([(2.0, 4.0)], [])
    assert refined_radii([1.5, 3, 10], 2) == [1.5, 2.0, 3, 4.0, 8.0, 10]
    with pytest.raises(DomainError):
        split_intervals([3, 2], 2)
    with pytest.raises(DomainError):
        split_intervals([1, 2], 1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 1000), min_size=2, max_size=6, unique=True), st.floats(1.5, 30))
def test_split_partitions_each_interval(radii, delta):
    radii = sorted(radii)
    long, short = split_intervals(radii, delta)
    parts = sorted(long + short)
    assert parts[0][0] == radii[0] and parts[-1][1] == radii[-1]
    assert all(a[1] == b[0] for a, b in zip(parts, parts[1:]))
    for a, b in long:
        for end in (a, b):
            k = np.log(end) / np.log(delta)
            assert k == pytest.approx(round(k), abs=1e-9)


def test_long_operator_on_constant_is_zero():
    sp = z_interval(64)
    sys_ = build_dyadic_system(sp)
    c = OperatorField.constant(sp, [[2.0, 1j], [-1j, 1.0]])
    assert np.abs(long_operator(c, sys_).values).max() < 1e-12
    with pytest.raises(DomainError):
        long_operator(c, sys_, v=[])


def test_sqfn_constant_and_single_scale():
    sp = single_scale(6)
    sys_ = build_dyadic_system(sp)
    # every ball of radius >= 1 is the whole space, so all differences vanish
    est = estimate_sqfn_constants(sys_, 2.0, 5, 0, radii=[1.0, 2.0, 3.0])
    assert est.strong == 0.0 and est.weak == 0.0
    c = OperatorField.constant(sp, np.eye(2))
    assert np.abs(long_operator(c, sys_).values).max() < 1e-12
    with pytest.raises(DomainError):
        estimate_sqfn_constants(sys_, 0.5, 1, 0)


def test_sqfn_estimates_are_finite_and_ordered():
    sys_ = build_dyadic_system(z_interval(16))
    est = estimate_sqfn_constants(sys_, 1.5, 4, 1)
    assert 0 < est.strong_lower <= est.strong < np.inf
    assert est.weak > 0 and est.long >= 0
    assert est.to_json()["size"] == 16
