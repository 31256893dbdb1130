"""Adversarial rollouts, falsification and a brute-force grid oracle.

Edges are drawn uniformly among the out-edges whose attack set is nonempty
at the current state (a nominal edge always qualifies).  Only when no edge
qualifies is an attack edge taken with ``a = 0`` and the step tagged.
An alarm is charged to the attack only on steps whose attack enters the
residual (output attacks).  Every other residual excursion, on nominal
steps or on input-only attack steps, is recorded separately as a false
alarm of the detector itself.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InitialStateOutsideZ
from .geometry import HPolytope, PolyUnion, Tolerances
from .geometry.lp import lp_solve
from .model import Detector
from .reach import SwitchedSystem, sample_union
from .stealth import ParamPolytope

ATTACK_POLICIES = ("extreme", "random", "zero")
DISTURBANCE_POLICIES = ("vertex", "random", "zero", "greedy")


@dataclass
class Trajectory:
    z: np.ndarray
    nodes: list
    word: list
    attacks: list
    disturbances: np.ndarray
    residuals: list
    alarms: np.ndarray
    nominal_alarms: np.ndarray
    infeasible: np.ndarray
    violation: int | None = None

    def __post_init__(self):
        T = len(self.word)
        if not (self.z.shape[0] == len(self.nodes) == T + 1
                and len(self.attacks) == len(self.residuals) == T
                and self.disturbances.shape[0] == T
                and len(self.alarms) == len(self.nominal_alarms) == len(self.infeasible) == T):
            raise ValueError("inconsistent trajectory lengths")

    @property
    def T(self) -> int:
        return len(self.word)

    def residual_error(self, sys: SwitchedSystem) -> float:
        """Largest deviation between stored and recomputed residuals."""
        err = 0.0
        for t, sid in enumerate(self.word):
            r = sys.modes[sid].residual(self.z[t], self.attacks[t], self.disturbances[t])
            err = max(err, float(np.max(np.abs(r - self.residuals[t]), initial=0.0)))
        return err

    def stealth_error(self, sys: SwitchedSystem) -> float:
        """Largest violation of ``a(t) in A(z(t))`` over attacked steps."""
        err = 0.0
        for t, sid in enumerate(self.word):
            A = sys.stealth[sid]
            if A.n_a == 0 or self.infeasible[t]:
                continue
            v = A.Ga @ self.attacks[t] - A.rhs(self.z[t])
            err = max(err, float(np.max(v, initial=0.0)))
        return err

    def to_jsonl(self) -> str:
        lines = []
        for t in range(self.T):
            lines.append(json.dumps({
                "t": t, "node": str(self.nodes[t]), "mode": str(self.word[t]),
                "z": self.z[t].tolist(), "a": np.asarray(self.attacks[t]).tolist(),
                "eta": self.disturbances[t].tolist(), "r": np.asarray(self.residuals[t]).tolist(),
                "alarm": bool(self.alarms[t]), "nominal_alarm": bool(self.nominal_alarms[t]),
                "infeasible": bool(self.infeasible[t]),
            }))
        lines.append(json.dumps({"t": self.T, "node": str(self.nodes[-1]),
                                 "z": self.z[-1].tolist(), "violation": self.violation}))
        return "\n".join(lines) + "\n"


def _detector(sys: SwitchedSystem, detector):
    return sys.meta.get("detector") if detector is None else detector


def _min_norm_attack(A: ParamPolytope, z):
    """Point of ``A(z)`` with the smallest infinity norm (None if empty)."""
    n = A.n_a
    rhs = A.rhs(z)
    if np.all(rhs >= -1e-12):
        return np.zeros(n)
    I = np.eye(n)
    G = np.block([[A.Ga, np.zeros((A.n_rows, 1))],
                  [I, -np.ones((n, 1))], [-I, -np.ones((n, 1))]])
    c = np.r_[np.zeros(n), 1.0]
    res = lp_solve(c, G, np.r_[rhs, np.zeros(2 * n)], "min")
    return res.x[:n] if res.optimal else None


def _choose_attack(A: ParamPolytope, z, policy, rng):
    """Attack in ``A(z)`` following ``policy``; ``None`` when ``A(z)`` is empty."""
    if A.n_a == 0:
        return np.zeros(0)
    if policy == "extreme":
        d = rng.standard_normal(A.n_a)
        res = lp_solve(d, A.Ga, A.rhs(z), "max")
        return res.x if res.optimal else None
    if policy == "random":
        P = HPolytope(A.Ga, A.rhs(z), dim=A.n_a)
        if P.is_empty():
            return None
        V = P.vertex_array()
        w = rng.dirichlet(np.ones(V.shape[0]))
        return w @ V
    if policy == "zero":
        return _min_norm_attack(A, z)
    raise ValueError(f"unknown attack policy {policy!r}")


def _sample_box_poly(P: HPolytope, rng, tries: int = 1000):
    lo, hi = P.vertex_array().min(axis=0), P.vertex_array().max(axis=0)
    for _ in range(tries):
        x = lo + (hi - lo) * rng.random(P.dim)
        if P.contains_point(x):
            return x
    return P.chebyshev()[0]


def _choose_disturbance(sys, mode, z, a, Hv, policy, rng):
    if policy == "vertex":
        return Hv[rng.integers(Hv.shape[0])]
    if policy == "random":
        return _sample_box_poly(sys.H, rng)
    if policy == "zero":
        return np.zeros(sys.H.dim)
    if policy == "greedy":
        nxt = (mode.A @ z + mode.B @ a)[None, :] + Hv @ mode.E.T
        score = (nxt @ sys.Z.G.T - sys.Z.g).max(axis=1)
        return Hv[int(np.argmax(score))]
    raise ValueError(f"unknown disturbance policy {policy!r}")


def rollout(sys: SwitchedSystem, z0, node0, T: int, attack_policy: str = "extreme",
            disturbance_policy: str = "vertex", seed: int = 0,
            detector: Detector | None = None) -> Trajectory:
    """Simulate ``T`` steps of the switched system from ``(z0, node0)``."""
    if attack_policy not in ATTACK_POLICIES:
        raise ValueError(f"unknown attack policy {attack_policy!r}")
    if disturbance_policy not in DISTURBANCE_POLICIES:
        raise ValueError(f"unknown disturbance policy {disturbance_policy!r}")
    z = np.asarray(z0, dtype=float)
    tol = sys.tol
    if not sys.Z.contains_point(z, tol):
        raise InitialStateOutsideZ("initial state is outside Z")
    if node0 not in sys.graph.nodes:
        raise ValueError(f"unknown graph node {node0!r}")
    det = _detector(sys, detector)
    rng = np.random.default_rng(seed)
    Hv = sys.H.vertex_array()
    zs, nodes, word, attacks, dists, res = [z], [node0], [], [], [], []
    alarms, nom_alarms, infeasible = [], [], []
    violation = None
    node = node0
    for t in range(T):
        outs = sys.graph.out_edges(node)
        options = []
        for e in outs:
            a = _choose_attack(sys.stealth[e[2]], z, attack_policy, rng)
            if a is not None:
                options.append((e, a))
        if options:
            e, a = options[rng.integers(len(options))]
            tag = False
        else:
            e = outs[rng.integers(len(outs))]
            a = np.zeros(sys.modes[e[2]].n_a)
            tag = True
        mode = sys.modes[e[2]]
        eta = _choose_disturbance(sys, mode, z, a, Hv, disturbance_policy, rng)
        r = mode.residual(z, a, eta)
        out = bool(det.alarm(r)) if det is not None else False
        charged = mode.attack_in_residual and not tag
        alarms.append(out and charged)
        nom_alarms.append(out and not charged)
        infeasible.append(tag)
        z = mode.step(z, a, eta)
        node = e[1]
        if violation is None and not sys.Z.contains_point(z, tol):
            violation = t + 1
        zs.append(z)
        nodes.append(node)
        word.append(e[2])
        attacks.append(a)
        dists.append(eta)
        res.append(r)
    return Trajectory(np.array(zs), nodes, word, attacks,
                      np.array(dists).reshape(T, sys.H.dim), res,
                      np.array(alarms, dtype=bool), np.array(nom_alarms, dtype=bool),
                      np.array(infeasible, dtype=bool), violation)


# ----------------------------------------------------------------------
# vectorised simulation
# ----------------------------------------------------------------------

def batch_attack_argmax(A: ParamPolytope, Zb: np.ndarray, dirs: np.ndarray,
                        tol: float = 1e-9):
    """Maximiser of ``dirs[k] . a`` over ``A(Zb[k])`` for every row ``k``.

    Basic solutions are enumerated over all square row subsets, which is
    exact for the small attack dimensions of interest.  Returns
    ``(a, feasible)``.
    """
    P = Zb.shape[0]
    n = A.n_a
    if n == 0:
        return np.zeros((P, 0)), np.ones(P, dtype=bool)
    dirs = np.broadcast_to(dirs, (P, n))
    rhs = A.h0[None, :] + Zb @ A.H.T
    best = np.full(P, -np.inf)
    arg = np.zeros((P, n))
    for S in itertools.combinations(range(A.n_rows), n):
        M = A.Ga[list(S)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        a = np.linalg.solve(M, rhs[:, list(S)].T).T
        ok = np.all(a @ A.Ga.T <= rhs + tol * (1.0 + np.abs(rhs)), axis=1)
        val = np.where(ok, np.sum(a * dirs, axis=1), -np.inf)
        better = val > best
        best[better] = val[better]
        arg[better] = a[better]
    return arg, np.isfinite(best)


@dataclass
class BatchResult:
    exits: np.ndarray
    first_exit: np.ndarray
    alarms: np.ndarray
    nominal_alarms: np.ndarray
    infeasible_steps: np.ndarray
    stealth_error: float
    paths: np.ndarray | None = None
    words: list | None = field(default=None, repr=False)
    signals: list | None = field(default=None, repr=False)


def simulate_batch(sys: SwitchedSystem, Z0, nodes0, T: int, seed: int = 0,
                   disturbance_policy: str = "vertex", record: bool = False,
                   detector: Detector | None = None) -> BatchResult:
    """Many rollouts at once with extreme attacks (random directions)."""
    if disturbance_policy not in ("vertex", "greedy", "zero"):
        raise ValueError(f"unsupported batch disturbance policy {disturbance_policy!r}")
    Z0 = np.atleast_2d(np.asarray(Z0, dtype=float))
    P, n_z = Z0.shape
    tol = sys.tol
    if not np.all(sys.Z.contains_points(Z0, tol)):
        raise InitialStateOutsideZ("initial states outside Z")
    det = _detector(sys, detector)
    rng = np.random.default_rng(seed)
    nodes = list(sys.graph.nodes)
    idx = {v: k for k, v in enumerate(nodes)}
    cur = np.array([idx[v] for v in np.broadcast_to(np.asarray(nodes0, dtype=object), (P,))])
    Hv = sys.H.vertex_array()
    z = Z0.copy()
    first_exit = np.full(P, -1)
    alarms = np.zeros(P, dtype=int)
    nom_alarms = np.zeros(P, dtype=int)
    infeasible = np.zeros(P, dtype=int)
    stealth_err = 0.0
    paths = [z.copy()] if record else None
    words = [] if record else None
    signals = [] if record else None
    for t in range(T):
        nz = np.empty_like(z)
        nxt = cur.copy()
        step_word = np.empty(P, dtype=object)
        step_sig = np.empty(P, dtype=object)
        u = rng.random(P)
        for k, v in enumerate(nodes):
            sel = np.flatnonzero(cur == k)
            if sel.size == 0:
                continue
            zs = z[sel]
            outs = sys.graph.out_edges(v)
            cand_a, cand_ok = [], []
            for e in outs:
                A = sys.stealth[e[2]]
                dirs = rng.standard_normal((sel.size, A.n_a))
                a, ok = batch_attack_argmax(A, zs, dirs)
                cand_a.append(a)
                cand_ok.append(ok)
            ok = np.array(cand_ok)                       # (edges, points)
            count = ok.sum(axis=0)
            none = count == 0
            # uniform pick among feasible edges, or among all when none is
            pool = np.where(none[None, :], True, ok)
            rank = np.floor(u[sel] * pool.sum(axis=0)).astype(int)
            csum = np.cumsum(pool, axis=0) - 1
            choice = np.argmax((csum == rank[None, :]) & pool, axis=0)
            for j, e in enumerate(outs):
                m = choice == j
                if not m.any():
                    continue
                mode = sys.modes[e[2]]
                A = sys.stealth[e[2]]
                pts = sel[m]
                a = cand_a[j][m]
                tag = none[m]
                a[tag] = 0.0
                if A.n_a and (~tag).any():
                    viol = (a[~tag] @ A.Ga.T) - (A.h0[None, :] + zs[m][~tag] @ A.H.T)
                    stealth_err = max(stealth_err, float(viol.max(initial=0.0)))
                base = zs[m] @ mode.A.T + a @ mode.B.T
                if disturbance_policy == "vertex":
                    eta = Hv[rng.integers(Hv.shape[0], size=pts.size)]
                elif disturbance_policy == "zero":
                    eta = np.zeros((pts.size, sys.H.dim))
                else:
                    cand = base[:, None, :] + (Hv @ mode.E.T)[None, :, :]
                    score = (cand @ sys.Z.G.T - sys.Z.g).max(axis=2)
                    eta = Hv[np.argmax(score, axis=1)]
                nz[pts] = base + eta @ mode.E.T
                if det is not None:
                    r = zs[m] @ mode.C.T + a @ mode.D.T + eta @ mode.F.T
                    out = ~det.R.contains_points(r, tol)
                    charged = (~tag) & mode.attack_in_residual
                    alarms[pts] += out & charged
                    nom_alarms[pts] += out & ~charged
                infeasible[pts] += tag & (not mode.is_nominal)
                nxt[pts] = idx[e[1]]
                step_word[pts] = e[2]
                if record:
                    for q, p in enumerate(pts):
                        step_sig[p] = (a[q].copy(), eta[q].copy(), bool(tag[q]))
        z, cur = nz, nxt
        inside = sys.Z.contains_points(z, tol)
        new = (~inside) & (first_exit < 0)
        first_exit[new] = t + 1
        if record:
            paths.append(z.copy())
            words.append(step_word)
            signals.append(step_sig)
    return BatchResult(first_exit >= 0, first_exit, alarms, nom_alarms, infeasible,
                       stealth_err, np.array(paths) if record else None, words, signals)


# ----------------------------------------------------------------------
# falsification
# ----------------------------------------------------------------------

@dataclass
class FalsifyReport:
    counterexample: Trajectory | None
    inside_trials: int
    inside_exits: int
    outside_trials: int
    outside_exits: int


def _boundary_points(U: PolyUnion, n: int, rng, iters: int = 30):
    """Points just inside and just outside the boundary of ``U``."""
    base = sample_union(U, n, rng)
    if base.shape[0] == 0:
        return base, base
    d = rng.standard_normal(base.shape)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    lo = np.zeros(base.shape[0])
    span = max(float(np.ptp(np.vstack([P.vertex_array() for P in U.pieces]), axis=0).max()), 1.0)
    hi = np.full(base.shape[0], 2.0 * span)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = U.contains_points(base + mid[:, None] * d, Tolerances(eps_set=1e-12))
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return base + 0.999 * lo[:, None] * d, base + (lo + 0.02 * span)[:, None] * d


def falsify(sys: SwitchedSystem, safe_set: PolyUnion, budget: int = 1000, seed: int = 0,
            T: int = 50) -> FalsifyReport:
    """Search for a safe-set start that an admissible attack drives out of Z.

    Starts on the inner boundary shell are the soundness test; starts just
    outside the set are simulated as well and only counted.
    """
    if not safe_set.pieces or safe_set.is_empty():
        return FalsifyReport(None, 0, 0, 0, 0)
    rng = np.random.default_rng(seed)
    inner, outer = _boundary_points(safe_set, budget, rng)
    outer = outer[sys.Z.contains_points(outer, sys.tol)]
    nodes = list(sys.graph.nodes)
    cex = None
    exits_in = exits_out = 0
    # a claimed safe state outside Z is a counterexample by itself
    bad = ~sys.Z.contains_points(inner, sys.tol)
    if bad.any():
        z0 = inner[np.flatnonzero(bad)[0]]
        e = np.zeros(0, dtype=bool)
        cex = Trajectory(z0[None, :], [nodes[0]], [], [], np.zeros((0, sys.H.dim)), [],
                         e, e.copy(), e.copy(), 0)
        exits_in = int(bad.sum())
        inner = inner[~bad]
    for pts, inside in ((inner, True), (outer, False)):
        if pts.shape[0] == 0:
            continue
        starts = np.array(nodes, dtype=object)[rng.integers(len(nodes), size=pts.shape[0])]
        sub = int(rng.integers(2**31))
        res = simulate_batch(sys, pts, starts, T, seed=sub, disturbance_policy="greedy",
                             record=inside)
        if inside:
            exits_in += int(res.exits.sum())
            if res.exits.any() and cex is None:
                k = int(np.flatnonzero(res.exits)[0])
                cex = _replay(sys, res, k, starts[k])
        else:
            exits_out = int(res.exits.sum())
    return FalsifyReport(cex, inner.shape[0] + int(bad.sum()), exits_in, outer.shape[0], exits_out)


def _replay(sys, res: BatchResult, k: int, node0) -> Trajectory:
    """Trajectory view of rollout ``k`` of a recorded batch."""
    z = res.paths[:, k, :]
    word = [w[k] for w in res.words]
    nodes = [node0]
    for sid in word:
        nodes.append(next(d for s, d, lab in sys.graph.out_edges(nodes[-1]) if lab == sid))
    det = sys.meta.get("detector")
    attacks, dists, resid, alarms, nom, tags = [], [], [], [], [], []
    for t, sid in enumerate(word):
        mode = sys.modes[sid]
        a, eta, tag = res.signals[t][k]
        r = mode.residual(z[t], a, eta)
        out = bool(det.alarm(r)) if det is not None else False
        charged = mode.attack_in_residual and not tag
        attacks.append(a)
        dists.append(eta)
        resid.append(r)
        alarms.append(out and charged)
        nom.append(out and not charged)
        tags.append(tag)
    T = len(word)
    v = int(res.first_exit[k]) if res.first_exit[k] >= 0 else None
    return Trajectory(z, nodes, word, attacks, np.array(dists).reshape(T, sys.H.dim), resid,
                      np.array(alarms, dtype=bool), np.array(nom, dtype=bool),
                      np.array(tags, dtype=bool), v)


# ----------------------------------------------------------------------
# grid oracle
# ----------------------------------------------------------------------

@dataclass
class GridResult:
    points: np.ndarray
    inside_Z: np.ndarray
    violates: np.ndarray
    first_violation: np.ndarray
    T: int

    @property
    def never_violates(self) -> np.ndarray:
        return ~self.violates

    def to_csv(self) -> str:
        n = self.points.shape[1]
        head = ",".join([f"z{i + 1}" for i in range(n)] + ["label", "first_violation"])
        lines = [head]
        for p, bad, step in zip(self.points, self.violates, self.first_violation):
            label = "violates" if bad else "safe"
            lines.append(",".join([repr(float(x)) for x in p] + [label, str(int(step))]))
        return "\n".join(lines) + "\n"


def grid_points(box_lo, box_hi, resolution: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(box_lo, box_hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def grid_oracle(sys: SwitchedSystem, resolution: int = 9, T: int = 30,
                points: np.ndarray | None = None) -> GridResult:
    """Label grid points of the bounding box of ``Z`` by whether an admissible
    adversary drives them out of ``Z`` within ``T`` steps.

    For every constraint row ``j`` and horizon ``t`` the adversary
    maximises ``G_j z(t)``: disturbances take the maximising vertex of ``H``,
    attacks the maximising vertex of ``A(z)`` at the actual state, and over
    graph walks (from any start node) a per-node dynamic programme keeps the
    state with the largest ``G_j A^(t-s) z(s)``.  A point is marked only
    when a concrete admissible trajectory leaves ``Z``, so the labels
    under-report violations; the safe set must avoid every marked point.
    """
    from .geometry.polytope import bounding_box

    tol = sys.tol
    if points is None:
        lo, hi = bounding_box(sys.Z)
        points = grid_points(lo, hi, resolution)
    points = np.asarray(points, dtype=float)
    N = points.shape[0]
    G, g = sys.Z.G, sys.Z.g
    inside = np.all(points @ G.T <= g + tol.eps_set, axis=1)
    first = np.where(inside, -1, 0)
    modes = sys.modes
    A0 = next(iter(modes.values())).A
    powers = [np.eye(sys.n_z)]
    for _ in range(T):
        powers.append(A0 @ powers[-1])
    Hv = sys.H.vertex_array()
    nodes = list(sys.graph.nodes)
    edges = list(sys.graph.edges)
    for j in range(G.shape[0]):
        for t in range(1, T + 1):
            act = np.flatnonzero(first < 0)
            if act.size == 0:
                break
            state = {v: points[act].copy() for v in nodes}
            valid = {v: np.ones(act.size, dtype=bool) for v in nodes}
            for s in range(t):
                w = G[j] @ powers[t - s - 1]
                best = {v: np.full(act.size, -np.inf) for v in nodes}
                nstate = {v: np.zeros((act.size, sys.n_z)) for v in nodes}
                for src, dst, sid in edges:
                    m = valid[src]
                    if not m.any():
                        continue
                    mode = modes[sid]
                    zs = state[src][m]
                    eta = Hv[int(np.argmax(Hv @ (mode.E.T @ w)))]
                    a, ok = batch_attack_argmax(sys.stealth[sid], zs, mode.B.T @ w)
                    nxt = zs @ mode.A.T + a @ mode.B.T + mode.E @ eta
                    rows = np.flatnonzero(m)[ok]
                    nxt = nxt[ok]
                    out = np.any(nxt @ G.T > g + tol.eps_set, axis=1)
                    hit = act[rows[out]]
                    fresh = first[hit] < 0
                    first[hit[fresh]] = s + 1
                    pot = nxt @ w
                    better = pot > best[dst][rows]
                    best[dst][rows[better]] = pot[better]
                    nstate[dst][rows[better]] = nxt[better]
                state = nstate
                valid = {v: np.isfinite(best[v]) for v in nodes}
    return GridResult(points, inside, first >= 0, first, T)
