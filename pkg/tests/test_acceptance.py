"""Acceptance checks, one per numbered criterion.

Each test prints a ``CRITERION k: PASS|FAIL`` line (with a short detail)
straight to the terminal and then asserts the same condition.
"""
import itertools
import time

import numpy as np
import pytest

from conftest import random_graph, random_polytope, toy_raw
from cpsimpact.attack_graph import (ATTACK, build_dwell_graph, dwell_predicate, enumerate_words,
                                    kron_product, validate)
from cpsimpact.geometry import (HPolytope, PolyUnion, Tolerances, affine_image, affine_preimage,
                                contains_set, erode, hull, intersect, minkowski_distance,
                                minkowski_sum, multiset_equal, union_subset, union_volume,
                                volume)
from cpsimpact.metrics import impact_sweep, slice_union
from cpsimpact.model import NOMINAL
from cpsimpact.reach import (CONVERGED, backward_sequence, backward_update,
                             invariance_certificate, sample_union)
from cpsimpact.scenario import build_scenario, read_scenario
from cpsimpact.sim import grid_oracle, simulate_batch
from cpsimpact.stealth import pointwise_max, robustify

pytestmark = pytest.mark.slow

FIXTURES = ["twotank_sensor1", "twotank_sensor2", "twotank_actuator", "twotank_combined"]
E_SLICE = ([2, 3], [0.0, 0.0])
MC_TOL = 0.02


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {label}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def scenarios():
    return {name: build_scenario(read_scenario(name)) for name in FIXTURES}


# ----------------------------------------------------------------------
# 1. two-tank reproduction
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def sweeps(scenarios):
    t0 = time.perf_counter()
    out = {}
    for name in ("twotank_sensor1", "twotank_sensor2", "twotank_actuator"):
        sc = scenarios[name]
        ns = list(sc.raw["sweep"]["n_max"])
        out[name] = impact_sweep(sc, ns)
    sc = scenarios["twotank_sensor2"]
    slices = []
    for n in sc.raw["sweep"]["n_max"]:
        if n == 0:
            continue
        res = backward_sequence(sc.with_n_max(n).system, sc.lmax, sc.method)
        S = res.safe_set
        Sl = slice_union(S, *E_SLICE) if S.pieces else PolyUnion.empty(2)
        slices.append((n, Sl))
    out["slices"] = slices
    out["elapsed"] = time.perf_counter() - t0
    return out


def test_criterion_1a_sensor2_slices_shrink(sweeps, report):
    slices = sweeps["slices"]
    rng = np.random.default_rng(1)
    vm = [union_volume(S, Tolerances(eps_vol=MC_TOL), rng=rng) for _, S in slices]
    vols = [float(v) for v, _ in vm]
    nonempty = all(S.pieces and not S.is_empty() for _, S in slices)
    nested = all(union_subset(b, a) is True for (_, a), (_, b) in zip(slices, slices[1:]))
    # sampled volumes must drop by more than their tolerance to count
    strict = all(vb < va * (1 - MC_TOL if "mc" in (ma, mb) else 1.0)
                 for (va, ma), (vb, mb) in zip(vm, vm[1:]))
    ok = nonempty and nested and strict
    detail = ("e=0 slice volumes by N_max: "
              + ", ".join(f"{n}:{v:.6g}" for (n, _), v in zip(slices, vols))
              + f"; nonempty={nonempty} nested={nested} strictly decreasing={strict}")
    report("1(a)", ok, detail)
    assert ok


def _first_empty(rows):
    for r in rows:
        if r.I1 == 1.0 and r.I2 == 1.0:
            return r.n_max
    return None


def test_criterion_1b_actuator_empties_first(sweeps, report):
    act = _first_empty(sweeps["twotank_actuator"])
    s1 = _first_empty(sweeps["twotank_sensor1"])
    s2 = _first_empty(sweeps["twotank_sensor2"])
    inf = float("inf")
    ok = act is not None and act < min(s1 if s1 is not None else inf, s2 if s2 is not None else inf)
    detail = (f"first N_max with I1 = I2 = 1: actuator={act} sensor1={s1} sensor2={s2}; "
              f"actuator I1 by N_max: "
              + ", ".join(f"{r.n_max}:{r.I1:.4g}" for r in sweeps["twotank_actuator"]))
    report("1(b)", ok, detail)
    assert ok


def test_criterion_1c_tank2_sensor_less_vulnerable(sweeps, report):
    s1 = {r.n_max: r.I1 for r in sweeps["twotank_sensor1"]}
    s2 = {r.n_max: r.I1 for r in sweeps["twotank_sensor2"]}
    common = sorted(set(s1) & set(s2))
    ok = bool(common) and all(s2[n] <= s1[n] for n in common)
    fast = sweeps["elapsed"] < 600
    detail = (", ".join(f"N_max={n}: I1 tank2={s2[n]:.4g} tank1={s1[n]:.4g}" for n in common)
              + f"; sweep time {sweeps['elapsed']:.0f}s (target < 600s)")
    report("1(c)", ok and fast, detail)
    assert ok and fast


# ----------------------------------------------------------------------
# 2. fixed point of the attack-free system against a classical oracle
# ----------------------------------------------------------------------

def classical_mrpi(Z, A, EH, max_iter=500):
    """Maximal robust invariant set by erosion and preimage."""
    omega = Z
    for _ in range(max_iter):
        nxt = intersect(omega, affine_preimage(erode(omega, EH), A))
        if contains_set(nxt, omega) and contains_set(omega, nxt):
            return nxt
        omega = nxt
    raise AssertionError("classical iteration did not converge")


def test_criterion_2_attack_free_fixed_point(scenarios, report):
    details, ok = [], True
    for name in ("twotank_sensor1", "twotank_sensor2"):
        sys_ = scenarios[name].nominal().system
        res = backward_sequence(sys_, 200)
        again = backward_update(sys_, res.multiset)
        idem = all(multiset_equal(again[i], res.multiset[i]) for i in sys_.graph.nodes)
        mode = sys_.modes[NOMINAL]
        ref = classical_mrpi(sys_.Z, mode.A, affine_image(sys_.H, mode.E))
        S = res.safe_set
        match = (union_subset(S, PolyUnion.of(ref)) is True
                 and union_subset(PolyUnion.of(ref), S) is True)
        this = res.status == CONVERGED and idem and match
        ok &= this
        details.append(f"{name}: status={res.status} iterations={res.iterations} "
                       f"idempotent={idem} matches oracle={match}")
    report("2", ok, "; ".join(details))
    assert ok


# ----------------------------------------------------------------------
# 3. nestedness and invariance certificates
# ----------------------------------------------------------------------

def test_criterion_3_nested_and_certified(scenarios, report):
    details, ok = [], True
    for name, sc in scenarios.items():
        sys_ = sc.system
        res = backward_sequence(sys_, 200, record=True)
        nested = all(union_subset(cur[i], prev[i]) is True
                     for prev, cur in zip(res.history, res.history[1:]) for i in sys_.graph.nodes)
        cert = invariance_certificate(sys_, res, n_samples=500, seed=0)
        this = nested and cert["passed"] and res.nested_repairs == 0
        ok &= this
        details.append(f"{name}: steps={len(res.history) - 1} nested={nested} "
                       f"certificate={cert['checked']} states, {len(cert['failures'])} failures")
    report("3", ok, "; ".join(details))
    assert ok


# ----------------------------------------------------------------------
# 4. grid-oracle containment
# ----------------------------------------------------------------------

def test_criterion_4_grid_oracle_containment(scenarios, report):
    details, ok = [], True
    cases = [("nominal", scenarios["twotank_sensor2"].nominal()),
             ("twotank_sensor1", scenarios["twotank_sensor1"]),
             ("twotank_sensor2", scenarios["twotank_sensor2"])]
    for label, sc in cases:
        sys_ = sc.system
        S = backward_sequence(sys_, 200).safe_set
        g = grid_oracle(sys_, resolution=9, T=30)
        inside = S.contains_points(g.points, Tolerances(eps_set=1e-12))
        bad = int((inside & g.violates).sum())
        ok &= bad == 0
        details.append(f"{label}: {len(g.points)} points, {int(inside.sum())} in safe set, "
                       f"{int(g.violates.sum())} violating, {bad} misclassified")
    report("4", ok, "; ".join(details))
    assert ok


# ----------------------------------------------------------------------
# 5. stealth soundness of rollouts
# ----------------------------------------------------------------------

def test_criterion_5_rollouts_stay_safe_and_silent(scenarios, report):
    details, ok = [], True
    for k, (name, sc) in enumerate(scenarios.items()):
        sys_ = sc.system
        S = backward_sequence(sys_, 200).safe_set
        rng = np.random.default_rng(100 + k)
        Z0 = sample_union(S, 10_000, rng)
        nodes = np.array(sys_.graph.nodes, dtype=object)[rng.integers(len(sys_.graph.nodes),
                                                                       size=Z0.shape[0])]
        out = simulate_batch(sys_, Z0, nodes, 50, seed=k)
        alarms, exits = int(out.alarms.sum()), int(out.exits.sum())
        this = Z0.shape[0] == 10_000 and alarms == 0 and exits == 0 and out.stealth_error <= 1e-9
        ok &= this
        details.append(f"{name}: {Z0.shape[0]} rollouts, {exits} exits, {alarms} attack alarms "
                       f"({int(out.nominal_alarms.sum())} honest detector alarms)")
    report("5", ok, "; ".join(details))
    assert ok


# ----------------------------------------------------------------------
# 6. geometry suite
# ----------------------------------------------------------------------

def test_criterion_6_geometry_suite(report):
    rng = np.random.default_rng(6)
    n_inst = 100
    fails = {}

    def count(key, cond):
        fails[key] = fails.get(key, 0) + (not cond)

    for _ in range(n_inst):
        n = int(rng.integers(2, 4))
        P, Q = random_polytope(rng, n), random_polytope(rng, n, radius=0.3)
        S = minkowski_sum(P, Q)
        ds = rng.standard_normal((5, n))
        count("support additivity",
              all(abs(S.support(d) - P.support(d) - Q.support(d)) <= 1e-7 for d in ds))
        back = erode(S, Q)
        count("erosion/sum duality", contains_set(back, P) and contains_set(P, back))
        H = hull(P.vertex_array())
        count("hull round trip", contains_set(H, P) and contains_set(P, H))
        lam = float(rng.uniform(0.05, 1.0))
        count("mu scaling law", abs(minkowski_distance(P, HPolytope(P.G, lam * P.g)) - lam) <= 1e-9)
        m = int(rng.integers(1, 7))
        G = np.vstack([np.eye(m), -np.eye(m), np.ones((1, m))])
        g = np.r_[np.ones(m), np.zeros(m), m + 1.0]
        p = rng.permutation(g.size)
        count("unit box volume", volume(HPolytope(G[p], g[p])) == 1.0)
    ok = all(v == 0 for v in fails.values())
    report("6", ok, f"{n_inst} instances each; failures: "
           + ", ".join(f"{k}={v}" for k, v in fails.items()))
    assert ok


# ----------------------------------------------------------------------
# 7. parametric LP duality
# ----------------------------------------------------------------------

def test_criterion_7_robustify_matches_lp(scenarios, report):
    rng = np.random.default_rng(7)
    worst, checked = 0.0, 0
    for sc in scenarios.values():
        sys_ = sc.system
        for sid, mode in sys_.modes.items():
            A = sys_.stealth[sid]
            if A.n_a == 0:
                continue
            q = mode.B.T @ rng.standard_normal(sys_.n_z)
            rr = robustify(q, A)
            for z in sample_union(PolyUnion.of(sys_.Z), 50, rng):
                ref = pointwise_max(A, q, z)
                val = rr.value(z)
                if np.isinf(ref):
                    err = 0.0 if (ref < 0 and rr.is_empty_at(z)) else np.inf
                else:
                    err = abs(val - ref)
                worst = max(worst, err)
                checked += 1
    ok = worst <= 1e-7
    report("7", ok, f"{checked} (mode, z) pairs, largest deviation {worst:.2e}")
    assert ok


# ----------------------------------------------------------------------
# 8. graph algebra
# ----------------------------------------------------------------------

def test_criterion_8_graph_algebra(report):
    rng = np.random.default_rng(8)
    kron_bad = 0
    for _ in range(100):
        G1, G2 = random_graph(rng), random_graph(rng)
        P = kron_product(G1, G2)
        kron_bad += not (len(P.nodes) == len(G1.nodes) * len(G2.nodes)
                         and len(P.edges) == len(G1.edges) * len(G2.edges) and validate(P) == [])
    lang_bad, words = 0, 0
    for n_max, n_min in itertools.product(range(0, 4), range(1, 4)):
        G = build_dwell_graph(n_max, n_min)
        for length in range(9):
            gen = {w for _, w in enumerate_words(G, length)}
            ref = {w for w in itertools.product((NOMINAL, ATTACK), repeat=length)
                   if dwell_predicate(w, n_max, n_min)}
            lang_bad += gen != ref
            words += 2 ** length
    ok = kron_bad == 0 and lang_bad == 0
    report("8", ok, f"Kronecker: 100 pairs, {kron_bad} mismatches; dwell language: "
           f"12 patterns, {words} words, {lang_bad} mismatching lengths")
    assert ok


# ----------------------------------------------------------------------
# 9. trivial-attack identity
# ----------------------------------------------------------------------

def test_criterion_9_nominal_only_scenario(report):
    details, ok = [], True
    for raw in (read_scenario("twotank_sensor2"), toy_raw()):
        raw = dict(raw, channels=[])
        sc = build_scenario(raw)
        rows = impact_sweep(sc, [0, 1, 3])
        this = set(sc.system.modes) == {NOMINAL} and all(r.I1 == 0.0 and r.I2 == 0.0 for r in rows)
        ok &= this
        details.append(f"{sc.name}: modes={sorted(sc.system.modes)} "
                       + ", ".join(f"I1={r.I1} I2={r.I2}" for r in rows))
    report("9", ok, "; ".join(details))
    assert ok
