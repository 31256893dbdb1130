import warnings

import numpy as np
import pytest

from cpsimpact.errors import DimensionMismatch, EmptyConstraintSet, IndexOutOfRange, Uncontrollable
from cpsimpact.geometry import HPolytope, cartesian_product, contains_set
from cpsimpact.model import (ChannelSelection, Detector, Gains, PlantModel, ackermann_place,
                             build_augmented_constraints, build_gamma, build_mode,
                             observer_gain, residual_alarm, spectral_radius)

AP = np.array([[0.9, 0.1], [0.1, 0.8]])
BP = np.array([[0.1], [0.0]])
CP2 = np.array([[0.0, 1.0]])


def twotank(Cp=CP2):
    box = HPolytope.ball_inf(1.0, 2)
    ny = Cp.shape[0]
    return PlantModel(AP, BP, Cp, box, HPolytope.ball_inf(1.0, 1), HPolytope.ball_inf(1.0, ny),
                      HPolytope.ball_inf(0.01, 2), HPolytope.ball_inf(0.01, ny))


def twotank_gains(plant):
    K = ackermann_place(plant.Ap, plant.Bp, [0.7, 0.8])
    L = observer_gain(plant.Ap, plant.Cp, [0.86, 0.001])
    return Gains.for_plant(plant, K, L)


def random_plant(rng, n=3, nu=2, ny=2):
    while True:
        Ap = rng.standard_normal((n, n))
        Ap *= 0.8 / spectral_radius(Ap)
        Bp = rng.standard_normal((n, nu))
        Cp = rng.standard_normal((ny, n))
        # gains that keep both loops Schur: small K, L with a check
        K = 0.05 * rng.standard_normal((nu, n))
        L = 0.05 * rng.standard_normal((n, ny))
        if spectral_radius(Ap - Bp @ K) < 0.95 and spectral_radius(Ap - L @ Cp) < 0.95:
            break
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        plant = PlantModel(Ap, Bp, Cp, HPolytope.ball_inf(1.0, n), HPolytope.ball_inf(1.0, nu),
                           HPolytope.ball_inf(1.0, ny), HPolytope.ball_inf(0.1, n),
                           HPolytope.ball_inf(0.1, ny))
    return plant, Gains.for_plant(plant, K, L)


def componentwise(plant, gains, sel, x0, xhat0, au, ay, v, w, estimator_sees_attack=False):
    """Plant, observer-based controller and detector stepped separately.

    The plant receives ``u + Gamma_u a_u``.  The estimator predicts with the
    uncorrupted ``u`` unless ``estimator_sees_attack`` is set.
    """
    Ap, Bp, Cp, K, L = plant.Ap, plant.Bp, plant.Cp, gains.K, gains.L
    Gu = build_gamma(sel.attacked_inputs, plant.n_u)
    Gy = build_gamma(sel.attacked_outputs, plant.n_y)
    x, xh = x0.copy(), xhat0.copy()
    xs, es, rs = [], [], []
    for t in range(len(v)):
        u = -K @ xh
        y_tilde = Cp @ x + w[t] + Gy @ ay[t]
        r = y_tilde - Cp @ xh
        u_tilde = u + Gu @ au[t]
        u_est = u_tilde if estimator_sees_attack else u
        xs.append(x)
        es.append(x - xh)
        rs.append(r)
        x = Ap @ x + Bp @ u_tilde + v[t]
        xh = Ap @ xh + Bp @ u_est + L @ r
    xs.append(x)
    es.append(x - xh)
    return np.array(xs), np.array(es), np.array(rs)


def augmented(mode, z0, au, ay, v, w):
    z = z0.copy()
    zs, rs = [], []
    for t in range(len(v)):
        a = np.r_[au[t], ay[t]]
        eta = np.r_[v[t], w[t]]
        zs.append(z)
        rs.append(mode.residual(z, a, eta))
        z = mode.step(z, a, eta)
    zs.append(z)
    return np.array(zs), np.array(rs)


def _signals(rng, plant, sel, T=20):
    nau, nay = len(sel.attacked_inputs), len(sel.attacked_outputs)
    return (rng.standard_normal((T, nau)), rng.standard_normal((T, nay)),
            0.1 * rng.standard_normal((T, plant.n_x)), 0.1 * rng.standard_normal((T, plant.n_y)))


SELECTIONS = [ChannelSelection(), ChannelSelection([], [1]), ChannelSelection([], [1, 2]),
              ChannelSelection([2], []), ChannelSelection([1], [2]), ChannelSelection([1, 2], [1, 2])]


@pytest.mark.parametrize("sel", SELECTIONS)
def test_augmented_matches_componentwise_simulation(rng, sel):
    """The estimator uses the command it computed; the actuator attack then
    drives the estimation error, which the flagged mode reproduces exactly."""
    for _ in range(5):
        plant, gains = random_plant(rng)
        x0, xh0 = rng.standard_normal(plant.n_x), rng.standard_normal(plant.n_x)
        au, ay, v, w = _signals(rng, plant, sel)
        xs, es, rs = componentwise(plant, gains, sel, x0, xh0, au, ay, v, w)
        mode = build_mode(plant, gains, sel, "m", input_attack_in_error=True)
        zs, rz = augmented(mode, np.r_[x0, x0 - xh0], au, ay, v, w)
        assert np.abs(zs - np.hstack([xs, es])).max() <= 1e-10
        assert np.abs(rz - rs).max() <= 1e-10
        if not sel.attacked_inputs:
            # without actuator attacks the default mode is the same system
            base = build_mode(plant, gains, sel, "m")
            zb, rb = augmented(base, np.r_[x0, x0 - xh0], au, ay, v, w)
            assert np.abs(zb - zs).max() <= 1e-10 and np.abs(rb - rs).max() <= 1e-10


@pytest.mark.parametrize("sel", SELECTIONS)
def test_default_mode_matches_estimator_fed_corrupted_command(rng, sel):
    """Default matrices: the actuator attack leaves the estimation error
    untouched, i.e. the estimator predicts with the command actually applied."""
    for _ in range(5):
        plant, gains = random_plant(rng)
        x0, xh0 = rng.standard_normal(plant.n_x), rng.standard_normal(plant.n_x)
        au, ay, v, w = _signals(rng, plant, sel)
        xs, es, rs = componentwise(plant, gains, sel, x0, xh0, au, ay, v, w,
                                   estimator_sees_attack=True)
        mode = build_mode(plant, gains, sel, "m")
        zs, rz = augmented(mode, np.r_[x0, x0 - xh0], au, ay, v, w)
        assert np.abs(zs - np.hstack([xs, es])).max() <= 1e-10
        assert np.abs(rz - rs).max() <= 1e-10


def test_twotank_gains_place_poles():
    plant = twotank()
    g = twotank_gains(plant)
    assert np.sort(np.linalg.eigvals(plant.Ap - plant.Bp @ g.K).real) == pytest.approx([0.7, 0.8],
                                                                                          abs=1e-8)
    assert np.sort(np.linalg.eigvals(plant.Ap - g.L @ plant.Cp).real) == pytest.approx(
        [0.001, 0.86], abs=1e-8)


def test_ackermann_random_and_identity(rng):
    for _ in range(20):
        A = rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 1))
        poles = rng.uniform(-0.9, 0.9, 3)
        K = ackermann_place(A, b, poles)
        assert np.sort(np.linalg.eigvals(A - b @ K).real) == pytest.approx(np.sort(poles), abs=1e-6)
    # companion form with target = own spectrum gives K = 0
    A = np.array([[0.0, 1.0], [-0.06, 0.5]])
    b = np.array([[0.0], [1.0]])
    K = ackermann_place(A, b, np.linalg.eigvals(A))
    assert np.abs(K).max() <= 1e-12
    with pytest.raises(Uncontrollable):
        ackermann_place(np.eye(2), np.array([[1.0], [0.0]]), [0.1, 0.2])
    with pytest.raises(DimensionMismatch):
        ackermann_place(np.eye(2), np.array([[1.0], [0.0]]), [0.1])


def test_closed_loop_is_schur_for_nominal_mode():
    plant = twotank()
    mode = build_mode(plant, twotank_gains(plant), ChannelSelection())
    assert spectral_radius(mode.A) < 1
    assert mode.B.shape == (4, 0) and mode.D.shape == (1, 0)


def test_build_gamma_examples():
    assert build_gamma({2}, 2).tolist() == [[0.0], [1.0]]
    assert build_gamma(set(), 3).shape == (3, 0)
    assert build_gamma({1, 3}, 3).tolist() == [[1, 0], [0, 0], [0, 1]]
    with pytest.raises(IndexOutOfRange):
        build_gamma({4}, 3)


def test_gamma_columns_orthonormal(rng):
    for _ in range(50):
        total = int(rng.integers(1, 7))
        k = int(rng.integers(0, total + 1))
        sel = rng.choice(np.arange(1, total + 1), size=k, replace=False)
        G = build_gamma(sel, total)
        assert np.array_equal(G.T @ G, np.eye(k))


def test_mode_block_structure():
    plant = twotank()
    g = twotank_gains(plant)
    m = build_mode(plant, g, ChannelSelection([1], [1]), "A")
    K, L = g.K, g.L
    assert np.allclose(m.A[:2, :2], AP - BP @ K) and np.allclose(m.A[:2, 2:], BP @ K)
    assert np.allclose(m.A[2:, :2], 0) and np.allclose(m.A[2:, 2:], AP - L @ CP2)
    assert np.allclose(m.B[:2, 0], BP[:, 0]) and np.allclose(m.B[2:, 1], -L[:, 0])
    assert np.allclose(m.B[2:, 0], 0) and np.allclose(m.B[:2, 1], 0)
    assert np.allclose(m.E, np.block([[np.eye(2), np.zeros((2, 1))], [np.eye(2), -L]]))
    assert np.allclose(m.C, [[0, 0, 0, 1]]) and np.allclose(m.D, [[0, 1]])
    assert np.allclose(m.F, [[0, 0, 1]])


def test_detector_alarm_examples():
    det = Detector(HPolytope.ball_inf(0.01, 1))
    assert residual_alarm(det, [0.0]) is False
    assert residual_alarm(det, [0.02]) is True
    assert residual_alarm(det, [0.01]) is False
    assert det.alarm(-0.0101) is True


def test_augmented_constraints_twotank():
    plant = twotank()
    g = twotank_gains(plant)
    cons = build_augmented_constraints(plant, g, e_max=0.5)
    rows = cons.Z.G / np.abs(cons.Z.G).max(axis=1, keepdims=True)
    # +-x1 <= 1 appear among the rows
    for sgn in (1, -1):
        hit = np.all(np.isclose(rows, [sgn, 0, 0, 0]), axis=1)
        assert hit.any()
        assert cons.Z.g[hit][0] / np.abs(cons.Z.G[hit][0]).max() == pytest.approx(1.0)
    H = cartesian_product(plant.V, plant.W)
    assert cons.H.dim == 3 and contains_set(cons.H, H) and contains_set(H, cons.H)


def test_augmented_constraints_sampled(rng):
    plant = twotank()
    g = twotank_gains(plant)
    cons = build_augmented_constraints(plant, g, e_max=0.5)
    pts = rng.uniform(-1, 1, (2000, 4))
    inside = cons.Z.contains_points(pts)
    assert inside.any()
    for z in pts[inside]:
        x, e = z[:2], z[2:]
        assert np.all(np.abs(x) <= 1 + 1e-9)
        assert np.all(np.abs(-g.K @ (x - e)) <= 1 + 1e-9)
        assert np.all(np.abs(plant.Cp @ x) <= 0.99 + 1e-9)
        assert np.all(np.abs(e) <= 0.5 + 1e-9)


def test_augmented_constraints_errors():
    plant = twotank()
    g = twotank_gains(plant)
    with pytest.raises(ValueError):
        build_augmented_constraints(plant, g, e_max=0.0)
    tight = PlantModel(AP, BP, CP2, HPolytope.ball_inf(1.0, 2), HPolytope.ball_inf(1.0, 1),
                       HPolytope.ball_inf(0.01, 1), HPolytope.ball_inf(0.01, 2),
                       HPolytope.ball_inf(0.01, 1))
    with pytest.raises(EmptyConstraintSet):
        build_augmented_constraints(tight, g)


def test_unstable_gains_rejected():
    plant = twotank()
    with pytest.raises(ValueError):
        Gains.for_plant(plant, np.zeros((1, 2)) - 20.0, np.zeros((2, 1)))
