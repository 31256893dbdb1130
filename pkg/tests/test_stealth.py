import numpy as np
import pytest

from cpsimpact.errors import DualInfeasible, EnumerationOverflow
from cpsimpact.geometry import HPolytope, PolyUnion, contains_set, lp_solve
from cpsimpact.model import build_gamma
from cpsimpact.reach import sample_union
from cpsimpact.scenario import build_scenario, read_scenario
from cpsimpact.stealth import (ParamPolytope, bound_rows, build_input_set, build_output_set,
                               build_residual_set, build_stealth_set, eval_at, intersect_param,
                               pointwise_max, product_set, robustify)

FIXTURES = ["twotank_sensor1", "twotank_sensor2", "twotank_actuator", "twotank_combined"]


@pytest.fixture(scope="module")
def scenarios():
    return {name: build_scenario(read_scenario(name)) for name in FIXTURES}


def z_samples(sc, n, rng):
    return sample_union(PolyUnion.of(sc.system.Z), n, rng)


def test_residual_set_constant_part():
    R = HPolytope.ball_inf(0.01, 1)
    W = HPolytope.ball_inf(0.01, 1)
    C = np.array([[0, 0, 0, 1.0]])
    Ar = build_residual_set(build_gamma({1}, 1), R, W, C)
    # each row: h_r - max_w G_r w with unit rows
    assert np.allclose(Ar.h0, R.g - 0.01, atol=1e-15)
    # z with zero e-part: symmetric bounds on a_y
    P = eval_at(Ar, [0.3, -0.2, 0.0, 0.0])
    assert pointwise_max(Ar, [1.0], [0.3, -0.2, 0, 0]) == pytest.approx(0.0, abs=1e-12)
    assert pointwise_max(Ar, [-1.0], [0.3, -0.2, 0, 0]) == pytest.approx(0.0, abs=1e-12)
    assert P.dim == 1


def test_residual_set_wider_detector():
    R = HPolytope.ball_inf(0.03, 1)
    W = HPolytope.ball_inf(0.01, 1)
    C = np.array([[0, 0, 0, 1.0]])
    Ar = build_residual_set(build_gamma({1}, 1), R, W, C)
    z = np.array([0.0, 0.0, 0.0, 0.005])
    # |C z + a + w| <= 0.03 for all |w| <= 0.01  <=>  -0.025 <= a <= 0.015
    assert pointwise_max(Ar, [1.0], z) == pytest.approx(0.015)
    assert -pointwise_max(Ar, [-1.0], z) == pytest.approx(-0.025)


def test_input_set_without_feedback_is_constant(rng):
    U = HPolytope.ball_inf(1.0, 2)
    Au = build_input_set(build_gamma({2}, 2), U, np.zeros((2, 2)), 2)
    assert np.abs(Au.H).max(initial=0.0) == 0.0
    z1, z2 = rng.standard_normal(4), rng.standard_normal(4)
    assert np.allclose(Au.rhs(z1), Au.rhs(z2))


def test_input_set_pointwise_oracle(rng):
    for _ in range(30):
        n, nu = 2, 2
        K = rng.standard_normal((nu, n))
        U = HPolytope.box([-1, -2], [1.5, 1])
        Au = build_input_set(build_gamma({1, 2}, nu), U, K, n)
        z = 0.3 * rng.standard_normal(2 * n)
        u = -K @ (z[:n] - z[n:])
        for a in rng.uniform(-3, 3, (20, 2)):
            assert Au.contains(z, a) == U.contains_point(u + a)


def test_output_set_pointwise_oracle(rng):
    Cp = np.array([[1.0, 0.5]])
    Y = HPolytope.box([-1.0], [0.8])
    W = HPolytope.ball_inf(0.05, 1)
    Ay = build_output_set(build_gamma({1}, 1), Y, W, Cp)
    for _ in range(100):
        z = rng.uniform(-1, 1, 4)
        a = rng.uniform(-2, 2, 1)
        y = Cp @ z[:2] + a
        expected = bool(y[0] + 0.05 <= 0.8 + 1e-12 and y[0] - 0.05 >= -1 - 1e-12)
        assert Ay.contains(z, a) == expected
    empty = build_output_set(np.zeros((1, 0)), Y, W, Cp)
    assert empty.n_a == 0 and empty.n_rows == 0


def test_product_of_empty_selections_is_zero_dimensional():
    Au = ParamPolytope(np.zeros((0, 0)), np.zeros(0), np.zeros((0, 4)))
    A = product_set(Au, Au)
    assert A.n_a == 0 and A.n_rows == 0
    assert A.contains(np.zeros(4), np.zeros(0))


def test_sensor_mode_is_output_and_residual_rows(scenarios):
    sc = scenarios["twotank_sensor2"]
    mode = sc.system.modes["A"]
    A = sc.system.stealth["A"]
    Ay = build_output_set(mode.Gamma_y, sc.plant.Y, sc.plant.W, sc.plant.Cp)
    Ar = build_residual_set(mode.Gamma_y, sc.detector.R, sc.plant.W, mode.C)
    expected = intersect_param(intersect_param(Ay, Ar), bound_rows([-0.05], [0.05], 4))
    assert A.n_a == 1
    assert np.allclose(A.Ga, expected.Ga) and np.allclose(A.h0, expected.h0)
    assert np.allclose(A.H, expected.H)


def test_actuator_bounds_present(scenarios):
    A = scenarios["twotank_actuator"].system.stealth["A"]
    P = eval_at(A, np.zeros(4))
    assert pointwise_max(A, [1.0], np.zeros(4)) == pytest.approx(0.01)
    assert pointwise_max(A, [-1.0], np.zeros(4)) == pytest.approx(0.01)
    assert P.contains_point([0.0])


def test_membership_matches_three_checks(scenarios, rng):
    sc = scenarios["twotank_combined"]
    sid = "A1,A2"
    mode = sc.system.modes[sid]
    A = sc.system.stealth[sid]
    K, Cp = sc.gains.K, sc.plant.Cp
    for z in z_samples(sc, 40, rng):
        for a in rng.uniform(-0.06, 0.06, (10, 2)):
            au, ay = a[: mode.n_au], a[mode.n_au:]
            u = -K @ (z[:2] - z[2:]) + mode.Gamma_u @ au
            ok_u = sc.plant.U.contains_point(u) and np.all(np.abs(au) <= 0.01 + 1e-12)
            y_hi = Cp @ z[:2] + mode.Gamma_y @ ay
            ok_y = (np.all(np.abs(y_hi) + 0.01 <= 1 + 1e-12))
            r = mode.C @ z + mode.Gamma_y @ ay
            ok_r = np.all(np.abs(r) + 0.01 <= 0.01 + 1e-12) and np.all(np.abs(ay) <= 0.05 + 1e-12)
            assert A.contains(z, a) == bool(ok_u and ok_y and ok_r)


def test_nominal_scenario_attack_set_contains_zero(scenarios):
    for sc in scenarios.values():
        A = sc.system.stealth["N"]
        assert A.contains(np.zeros(4), np.zeros(0))
        for sid, P in sc.system.stealth.items():
            assert np.all(P.h0 >= -1e-12), sid


def test_independent_rows_give_same_set():
    A = bound_rows([-0.2], [0.3], 4)
    assert np.allclose(A.rhs(np.ones(4)), A.rhs(-np.ones(4)))


def test_robustify_box():
    A = bound_rows([-0.5, -0.5], [0.5, 0.5], 3)
    rr = robustify([1.0, 0.0], A)
    assert rr.n_forms == 1
    assert rr.value(np.array([0.1, 2.0, -1.0])) == pytest.approx(0.5)
    zero = robustify([0.0, 0.0], A)
    assert zero.value(np.zeros(3)) == pytest.approx(0.0)


@pytest.mark.parametrize("name", FIXTURES)
def test_robustify_matches_pointwise_lp(scenarios, rng, name):
    sc = scenarios[name]
    for sid, mode in sc.system.modes.items():
        A = sc.system.stealth[sid]
        if A.n_a == 0:
            continue
        for j in range(4):
            q = mode.B.T @ rng.standard_normal(4)
            rr = robustify(q, A)
            for z in z_samples(sc, 50, rng):
                ref = pointwise_max(A, q, z)
                val = rr.value(z)
                if np.isinf(ref):
                    assert ref < 0 and rr.is_empty_at(z)
                else:
                    assert val == pytest.approx(ref, abs=1e-7)


def _support_triples(sc, sid, rng, n=100):
    A = sc.system.stealth[sid]
    Z = z_samples(sc, 2 * n, rng)
    for k in range(n):
        z1, z2 = Z[2 * k], Z[2 * k + 1]
        lam = rng.random()
        q = rng.standard_normal(A.n_a)
        h1, h2 = pointwise_max(A, q, z1), pointwise_max(A, q, z2)
        if np.isinf(h1) or np.isinf(h2):
            continue
        hm = pointwise_max(A, q, lam * z1 + (1 - lam) * z2)
        yield hm, lam * h1 + (1 - lam) * h2


@pytest.mark.parametrize("name", FIXTURES)
def test_support_is_concave_in_z(scenarios, rng, name):
    """The graph {(z, a) : Ga a <= h0 + H z} is convex, so the support of
    A(z) in any direction is concave along segments of feasible z."""
    sc = scenarios[name]
    for sid in sc.system.modes:
        if sc.system.stealth[sid].n_a == 0:
            continue
        for hm, comb in _support_triples(sc, sid, rng):
            assert hm >= comb - 1e-9


@pytest.mark.parametrize("name", ["twotank_sensor1", "twotank_sensor2"])
def test_support_upper_bound_on_sensor_modes(scenarios, rng, name):
    """Sensor modes pin a_y to an affine function of z, so the support is
    affine and the convex-combination upper bound holds as well."""
    sc = scenarios[name]
    for hm, comb in _support_triples(sc, "A", rng):
        assert hm <= comb + 1e-9


def test_support_upper_bound_fails_with_two_active_rows():
    """Witness that the upper bound is not generic: the bound
    a <= min(1, 1 + z) is concave and strictly above the chord at z = 0."""
    A = ParamPolytope(np.array([[1.0], [1.0], [-1.0]]), np.array([1.0, 1.0, 5.0]),
                      np.array([[0.0], [1.0], [0.0]]))
    h1, h2, hm = (pointwise_max(A, [1.0], [z]) for z in (-1.0, 1.0, 0.0))
    assert (h1, h2, hm) == pytest.approx((0.0, 1.0, 1.0))
    assert hm > 0.5 * h1 + 0.5 * h2


def test_monotone_rhs(scenarios, rng):
    sc = scenarios["twotank_combined"]
    sid = "A1,A2"
    mode = sc.system.modes[sid]
    base = build_stealth_set(mode, sc.plant, sc.gains, sc.detector, sc.bounds)
    wider = ParamPolytope(base.Ga, base.h0 + rng.uniform(0, 0.02, base.n_rows), base.H)
    for z in z_samples(sc, 50, rng):
        P, Q = eval_at(base, z), eval_at(wider, z)
        if P.is_empty():
            continue
        assert contains_set(Q, P)


def test_dual_infeasible_and_overflow(rng):
    # a >= -1 only: max of a is unbounded
    A = ParamPolytope(np.array([[-1.0]]), np.array([1.0]), np.zeros((1, 2)))
    with pytest.raises(DualInfeasible):
        robustify([1.0], A)
    assert robustify([-1.0], A).value(np.zeros(2)) == pytest.approx(1.0)
    # many facets of a polygon in the plane: many dual vertices for a generic q
    ang = np.linspace(0, 2 * np.pi, 40, endpoint=False)
    Ga = np.c_[np.cos(ang), np.sin(ang)]
    B = ParamPolytope(Ga, np.ones(40), np.zeros((40, 1)))
    with pytest.raises(EnumerationOverflow):
        robustify([0.3, 0.7], B, cap=3)


def test_emptiness_rays_match_lp(scenarios, rng):
    sc = scenarios["twotank_sensor2"]
    A = sc.system.stealth["A"]
    rr = robustify([0.0], A)
    # residual rows alone pin a_y = -e2 exactly; the bound makes A(z) empty for |e2| > 0.05
    pts = rng.uniform(-0.2, 0.2, (200, 4))
    for z in pts:
        feasible = lp_solve([0.0], A.Ga, A.rhs(z), "max").status != "infeasible"
        if abs(abs(z[3]) - 0.05) < 1e-6:
            continue
        assert rr.is_empty_at(z) == (not feasible)
        assert feasible == (abs(z[3]) <= 0.05)
