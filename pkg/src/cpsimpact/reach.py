"""Reachability maps and multi-set fixed-point iterations.

The backward map of a mode ``sigma`` sends a polytope ``{z : G z <= g}`` to
the states from which every admissible attack and disturbance keeps the
successor inside it.  Row ``j`` becomes

    G_j A z + max_{a in A(z)} G_j B a <= g_j - max_{eta in H} G_j E eta,

and the attack term is replaced by its dual-vertex forms, so every row is a
disjunction of half-spaces.  Where the attack set is empty the row holds
vacuously.

For a union target a successor cloud may straddle several pieces, so the
piecewise map under-approximates.  The exact map goes through the
complement: a state is bad when some admissible attack and disturbance lead
into ``box \\ S``, and the bad set is the projection of a lifted polytope in
``(z, a, eta)`` per convex piece of the complement.
"""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .attack_graph import AttackGraph
from .errors import EnumerationOverflow, InvalidGraph
from .geometry import (DEFAULT_TOL, EXACT, STATISTICAL, HPolytope, PolyUnion,
                       Tolerances, contains_set, hull, intersect,
                       multiset_equal, union_expand, union_intersect, union_merge,
                       union_prune,
                       union_subset)
from .geometry.enumeration import enumerate_vertices
from .geometry.projection import fourier_motzkin
from .geometry.polytope import bounding_box
from .geometry.union import union_difference
from .model import Mode
from .stealth import ParamPolytope, RobustifiedRow, robustify

log = logging.getLogger(__name__)

CONVERGED = "converged"
OUTER_INVARIANT = "outer_invariant"
ITERATION_CAP = "iteration_cap"
EMPTY = "empty"

MODE_EXACT = "exact"
MODE_CONVEX_INNER = "convex-inner"


@dataclass
class SwitchedSystem:
    """Modes, attack graph, constraint/disturbance sets and attack sets."""

    modes: dict
    graph: AttackGraph
    Z: HPolytope
    H: HPolytope
    stealth: dict
    tol: Tolerances = DEFAULT_TOL
    meta: dict = field(default_factory=dict)
    _rows: dict = field(default_factory=dict, repr=False)
    _rays: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        missing = [lab for lab in self.graph.labels if lab not in self.modes]
        if missing:
            raise InvalidGraph(f"graph labels without a mode: {missing}")
        for sid, mode in self.modes.items():
            A = self.stealth[sid]
            if A.n_a != mode.n_a or A.n_z != mode.n_z:
                raise ValueError(f"attack set of mode {sid!r} has wrong dimensions")
            if mode.n_z != self.Z.dim or mode.E.shape[1] != self.H.dim:
                raise ValueError(f"mode {sid!r} does not match Z or H")

    @property
    def n_z(self) -> int:
        return self.Z.dim

    def attack_set(self, sid) -> ParamPolytope:
        return self.stealth[sid]

    def robust_row(self, sid, q) -> RobustifiedRow:
        """Memoised dual-vertex forms for direction ``q`` in mode ``sid``."""
        key = (sid, tuple(np.round(q, 12)))
        if key not in self._rows:
            self._rows[key] = robustify(q, self.stealth[sid])
        return self._rows[key]

    def infeasible_pieces(self, sid, within: HPolytope) -> list:
        """Closed pieces of ``within`` where the attack set of ``sid`` is empty."""
        A = self.stealth[sid]
        if A.n_a == 0 and A.n_rows == 0:
            return []
        if sid not in self._rays:
            self._rays[sid] = robustify(np.zeros(A.n_a), A)
        rr = self._rays[sid]
        out = []
        for rH, rh in zip(rr.ray_H, rr.ray_h):
            if np.linalg.norm(rH) <= 1e-12:
                if rh < 0:
                    return [within]
                continue
            P = intersect(within, HPolytope(rH[None, :], [-rh], dim=self.n_z))
            if not P.is_empty(self.tol) and P.is_full_dim(self.tol):
                out.append(P)
        return out

    def feasible_region(self, sid) -> HPolytope:
        """``{z : A_sid(z) nonempty}`` as an H-polytope."""
        A = self.stealth[sid]
        if sid not in self._rays:
            self._rays[sid] = robustify(np.zeros(A.n_a), A)
        rr = self._rays[sid]
        return HPolytope(-rr.ray_H, rr.ray_h, dim=self.n_z)


# ----------------------------------------------------------------------
# backward map
# ----------------------------------------------------------------------

def _split(regions, forms, tol, cap):
    """Intersect every region with the disjunction of half-spaces ``forms``."""
    out = []
    for R in regions:
        hit = False
        parts = []
        for a, b in forms:
            if R.support(a) <= b + tol.eps_set:
                hit = True
                break
            P = intersect(R, HPolytope(a[None, :], [b], dim=R.dim))
            if not P.is_empty(tol) and P.is_full_dim(tol):
                parts.append(P)
        if hit:
            out.append(R)
        else:
            out.extend(parts)
    if len(out) > 1:
        out = list(union_prune(PolyUnion(out, out[0].dim), tol, redundancy=False).pieces)
    if len(out) > cap:
        raise EnumerationOverflow(f"backward map produced more than {cap} pieces")
    return out


def _robust_rows(sys: SwitchedSystem, sid, P: HPolytope):
    """Per-row list of half-spaces ``(a, b)`` whose disjunction is the
    robustified row."""
    mode: Mode = sys.modes[sid]
    rows = []
    dist = sys.H.support_many(P.G @ mode.E)
    GA = P.G @ mode.A
    for j in range(P.n_rows):
        gj = P.g[j] - dist[j]
        if mode.n_a == 0:
            rows.append([(GA[j], gj)])
            continue
        rr = sys.robust_row(sid, mode.B.T @ P.G[j])
        rows.append([(GA[j] + c, gj - d) for c, d in zip(rr.C, rr.d)])
    return rows


def _psi_piece(sys, sid, P, within, method, cap):
    rows = _robust_rows(sys, sid, P)
    base_G, base_g, multi = [], [], []
    for forms in rows:
        if len(forms) == 1:
            base_G.append(forms[0][0])
            base_g.append(forms[0][1])
        else:
            multi.append(forms)
    mode = sys.modes[sid]
    R0 = within
    if mode.n_a:
        R0 = intersect(R0, sys.feasible_region(sid))
    if base_G:
        R0 = intersect(R0, HPolytope(np.array(base_G), base_g, dim=sys.n_z))
    if R0.is_empty(sys.tol) or not R0.is_full_dim(sys.tol):
        return []
    if method == MODE_CONVEX_INNER:
        for forms in multi:
            best, best_r = None, -np.inf
            for a, b in forms:
                C = intersect(R0, HPolytope(a[None, :], [b], dim=sys.n_z))
                r = C.chebyshev()[1]
                if r > best_r:
                    best, best_r = C, r
            R0 = best
            if best_r <= sys.tol.eps_set:
                return []
        return [R0]
    regions = [R0]
    for forms in multi:
        regions = _split(regions, forms, sys.tol, cap)
        if not regions:
            break
    return regions


def _lifted(sys: SwitchedSystem, sid, within: HPolytope):
    """Lifted polytope ``{(z, a, eta) : z in within, a in A(z), eta in H}``,
    the successor map on it, a box around all successors and variable
    bounds."""
    key = ("lift", sid, within.G.tobytes(), within.g.tobytes())
    if key in sys._rays:
        return sys._rays[key]
    mode: Mode = sys.modes[sid]
    A = sys.stealth[sid]
    nz, na, nh = sys.n_z, mode.n_a, sys.H.dim
    blocks = [np.hstack([within.G, np.zeros((within.n_rows, na + nh))]),
              np.hstack([np.zeros((sys.H.n_rows, nz + na)), sys.H.G])]
    rhs = [within.g, sys.H.g]
    if na:
        blocks.append(np.hstack([-A.H, A.Ga, np.zeros((A.n_rows, nh))]))
        rhs.append(A.h0)
    L = HPolytope(np.vstack(blocks), np.concatenate(rhs), dim=nz + na + nh)
    M = np.hstack([mode.A, mode.B, mode.E])
    if L.is_empty(sys.tol):
        out = (L, M, None, None, None)
    else:
        hi = L.support_many(M)
        lo = -L.support_many(-M)
        vlo, vhi = bounding_box(L)
        pad = 1e-6 * (1.0 + np.abs(hi - lo))
        box = HPolytope.box(lo - pad, hi + pad)
        out = (L, M, box, vlo, vhi)
    sys._rays[key] = out
    return out


def _psi_complement(sys: SwitchedSystem, sid, S: PolyUnion, within: HPolytope):
    """Exact backward map of a union through the complement of ``S``."""
    tol = sys.tol
    L, M, box, vlo, vhi = _lifted(sys, sid, within)
    if box is None:
        return [within]
    holes = union_difference([box], S, tol)
    if holes is None:
        raise EnumerationOverflow("complement of the target has too many pieces")
    keep = range(sys.n_z)
    bad = []
    for D in holes:
        G = np.vstack([L.G, D.G @ M])
        g = np.r_[L.g, D.g]
        P = HPolytope(G, g, dim=L.dim)
        if P.is_empty(tol):
            continue
        Q = fourier_motzkin(P, keep, tol, lo=vlo, hi=vhi)
        if Q.is_empty(tol) or not Q.is_full_dim(tol):
            continue
        bad.append(Q)
    if not bad:
        return [within]
    good = union_difference([within], PolyUnion(bad, sys.n_z), tol)
    if good is None:
        raise EnumerationOverflow("backward map has too many pieces")
    return [P for P in good if P.is_full_dim(tol)]


def psi_backward(sys: SwitchedSystem, sid, S: PolyUnion, within: HPolytope | None = None,
                 method: str = MODE_EXACT, cap: int | None = None) -> PolyUnion:
    """States in ``within`` (default ``Z``) whose every successor under mode
    ``sid`` lies in ``S``.

    ``exact`` returns the union over dual-vertex choices for a convex target
    and goes through the complement for a union target; ``convex-inner``
    treats the pieces one at a time, keeps one half-space per row (chosen
    greedily for the largest inscribed ball) and drops the attack-infeasible
    region, a convex subset.
    """
    if method not in (MODE_EXACT, MODE_CONVEX_INNER):
        raise ValueError(f"unknown backward method {method!r}")
    within = sys.Z if within is None else within
    cap = sys.tol.max_union if cap is None else cap
    live = [P for P in S.pieces if not P.is_empty(sys.tol)]
    if method == MODE_EXACT and len(live) > 1:
        out = union_merge(union_prune(PolyUnion(_psi_complement(sys, sid, S, within), sys.n_z),
                                      sys.tol), sys.tol)
        if len(out) > cap:
            raise EnumerationOverflow(f"backward map produced {len(out)} pieces")
        return out
    pieces = []
    for P in S.pieces:
        if P.is_empty(sys.tol):
            continue
        pieces.extend(_psi_piece(sys, sid, P, within, method, cap))
    if method == MODE_EXACT and sys.modes[sid].n_a:
        pieces.extend(sys.infeasible_pieces(sid, within))
    out = union_prune(PolyUnion(pieces, sys.n_z), sys.tol)
    if method == MODE_CONVEX_INNER and len(out) > 1:
        # a single convex piece is promised: keep the largest one
        out = PolyUnion([max(out.pieces, key=lambda Q: Q.chebyshev()[1])], sys.n_z)
    if len(out) > cap:
        raise EnumerationOverflow(f"backward map produced {len(out)} pieces")
    return out


# ----------------------------------------------------------------------
# backward fixed point
# ----------------------------------------------------------------------

@dataclass
class ReachResult:
    multiset: dict
    status: str
    iterations: int
    equality_mode: str = EXACT
    underapproximation: bool = False
    method: str = MODE_EXACT
    nested_repairs: int = 0
    fallbacks: list = field(default_factory=list)
    history: list = field(default_factory=list)
    elapsed: float = 0.0
    _safe: PolyUnion | None = field(default=None, repr=False)

    @property
    def safe_set(self) -> PolyUnion:
        if self._safe is None:
            self._safe = maximal_safe_set(self)
        return self._safe

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "equality_mode": self.equality_mode,
            "underapproximation": self.underapproximation,
            "method": self.method,
            "nested_repairs": self.nested_repairs,
            "fallbacks": list(self.fallbacks),
            "multiset": {str(k): U.to_dict() for k, U in self.multiset.items()},
            "safe_set": self.safe_set.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReachResult":
        ms = {k: PolyUnion.from_dict(U) for k, U in d["multiset"].items()}
        res = cls(ms, d["status"], d["iterations"], d.get("equality_mode", EXACT),
                  d.get("underapproximation", False), d.get("method", MODE_EXACT),
                  d.get("nested_repairs", 0), d.get("fallbacks", []))
        if "safe_set" in d:
            res._safe = PolyUnion.from_dict(d["safe_set"])
        return res


def _cap_pieces(U: PolyUnion, cap: int) -> PolyUnion:
    if len(U) <= cap:
        return U
    ranked = sorted(U.pieces, key=lambda Q: -Q.chebyshev()[1])[:cap]
    return union_prune(PolyUnion(ranked, U.dim))


def backward_update(sys: SwitchedSystem, B: dict, method: str = MODE_EXACT,
                    memo: dict | None = None, info: dict | None = None) -> dict:
    """One step ``B_{l+1}^i = Z n (n over out-edges (i,d,s) of Psi(s, B_l^d))``."""
    tol = sys.tol
    memo = {} if memo is None else memo
    info = {} if info is None else info
    out = {}
    for i in sys.graph.nodes:
        node_method = method
        while True:
            try:
                cur = PolyUnion.of(sys.Z)
                for _, d, sid in sys.graph.out_edges(i):
                    key = (sid, d, node_method)
                    if key not in memo:
                        memo[key] = psi_backward(sys, sid, B[d], method=node_method)
                    cur = union_intersect(cur, memo[key], tol)
                    if not cur.pieces:
                        break
                    if len(cur) > tol.max_union:
                        raise EnumerationOverflow(f"node {i!r} exceeds {tol.max_union} pieces")
                break
            except EnumerationOverflow:
                if node_method == MODE_CONVEX_INNER:
                    cur = _cap_pieces(cur, tol.max_union)
                    break
                node_method = MODE_CONVEX_INNER
                info.setdefault("fallbacks", []).append(i)
        out[i] = union_expand(union_merge(cur, tol), sys.Z, tol)
    return out


def backward_sequence(sys: SwitchedSystem, l_max: int = 200, method: str = MODE_EXACT,
                      record: bool = False, progress=None) -> ReachResult:
    """Iterate the backward multi-set map from ``B_0^i = Z`` to a fixed point,
    to emptiness of some node, or to ``l_max`` iterations."""
    tol = sys.tol
    t0 = time.perf_counter()
    B = {i: PolyUnion.of(sys.Z) for i in sys.graph.nodes}
    eq_mode = EXACT
    repairs = 0
    fallbacks = []
    history = [B] if record else []
    status, l = ITERATION_CAP, l_max
    for step in range(l_max):
        info = {}
        new = backward_update(sys, B, method, info=info)
        fallbacks.extend((step + 1, i) for i in info.get("fallbacks", []))
        for i in sys.graph.nodes:
            nested = union_subset(new[i], B[i], tol)
            if nested is not True:
                repairs += 1
                new[i] = union_intersect(new[i], B[i], tol)
        if record:
            history.append(new)
        if progress is not None:
            progress(step + 1, new)
        if any(not new[i].pieces or new[i].is_empty(tol) for i in sys.graph.nodes):
            B = {i: union_prune(new[i], tol) for i in sys.graph.nodes}
            status, l = EMPTY, step + 1
            break
        same = True
        for i in sys.graph.nodes:
            eq = multiset_equal(new[i], B[i], tol)
            if eq.mode == STATISTICAL:
                eq_mode = STATISTICAL
            if not eq:
                same = False
                break
        if same:
            status, l = CONVERGED, step
            break
        B = new
    res = ReachResult(B, status, l, eq_mode, status == ITERATION_CAP or bool(fallbacks),
                      method, repairs, fallbacks, history, time.perf_counter() - t0)
    return res


def maximal_safe_set(result: ReachResult, tol: Tolerances = DEFAULT_TOL) -> PolyUnion:
    """Intersection of the multi-set over all nodes."""
    if result.status == EMPTY:
        dim = next(iter(result.multiset.values())).dim
        return PolyUnion.empty(dim)
    sets = list(result.multiset.values())
    out = sets[0]
    for U in sets[1:]:
        out = union_intersect(out, U, tol)
    return out


# ----------------------------------------------------------------------
# forward map
# ----------------------------------------------------------------------

def _vertices_of(S) -> np.ndarray:
    if isinstance(S, HPolytope):
        return S.vertex_array()
    return np.atleast_2d(np.asarray(S.V if hasattr(S, "V") else S, dtype=float))


def phi_forward(sys: SwitchedSystem, sid, S) -> HPolytope | None:
    """Convex one-step image ``{A z + B a + E eta : z in S, a in A(z), eta in H}``.

    ``S`` is an H-polytope, a V-polytope or a vertex array.  Returns ``None``
    when no state of ``S`` admits an attack in this mode.
    """
    mode: Mode = sys.modes[sid]
    Vz = _vertices_of(S)
    n_z = sys.n_z
    EH = sys.H.vertex_array() @ mode.E.T
    if mode.n_a == 0:
        img = Vz @ mode.A.T
    else:
        A = sys.stealth[sid]
        if isinstance(S, HPolytope):
            Gs, gs = S.G, S.g
        else:
            Ps = hull(Vz)
            Gs, gs = Ps.G, Ps.g
        G = np.block([[Gs, np.zeros((Gs.shape[0], mode.n_a))], [-A.H, A.Ga]])
        L = HPolytope(G, np.r_[gs, A.h0], dim=n_z + mode.n_a)
        if L.is_empty(sys.tol):
            return None
        Vl = enumerate_vertices(L.G, L.g)
        img = Vl @ np.hstack([mode.A, mode.B]).T
    pts = (img[:, None, :] + EH[None, :, :]).reshape(-1, n_z)
    return hull(pts)


@dataclass
class ForwardResult:
    multiset: dict
    status: str
    iterations: int
    hull_mode: bool
    inside_Z: bool | None = None
    diverged: bool = False
    approximated: bool = False


def template_directions(sys: SwitchedSystem) -> np.ndarray:
    """Unit directions for outer template bounds: the rows of ``Z`` plus
    ``+-e_i`` and ``+-e_i +- e_j``."""
    n = sys.n_z
    I = np.eye(n)
    rows = [sys.Z.G, I, -I]
    for i in range(n):
        for j in range(i + 1, n):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    rows.append((si * I[i] + sj * I[j])[None, :] / np.sqrt(2.0))
    D = np.vstack(rows)
    return np.unique(np.round(D, 12), axis=0)


def template_hull(pts: np.ndarray, D: np.ndarray) -> HPolytope:
    """Smallest polytope with facet normals ``D`` containing ``pts``."""
    return HPolytope(D, (pts @ D.T).max(axis=0), dim=pts.shape[1])


def forward_sequence(sys: SwitchedSystem, l_max: int = 50, hull_mode: bool = True,
                     bound: float = 1e3, max_vertices: int | None = 64,
                     check_every: int = 3, inflate: float = 0.25) -> ForwardResult:
    """``F_0^i = {0}``, ``F_{l+1}^i = union over in-edges (s,i,sigma) of Phi(sigma, F_l^s)``.

    In hull mode every node keeps the convex hull of its union (an
    over-approximation).  When a hull has more than ``max_vertices``
    vertices it is replaced by its template bound over
    :func:`template_directions`, which is still an outer bound and keeps the
    vertex count fixed; ``approximated`` is then set.  Iteration stops at a
    fixed point, at ``l_max`` or when a set leaves the box ``|z| <= bound``.

    Once approximated, every ``check_every`` steps the template bounds are
    inflated by ``inflate`` times their widths and tested for invariance
    along every edge.  On success the inflated sets contain the minimal
    invariant multi-set, they are returned and the status is
    ``OUTER_INVARIANT``.
    """
    tol = sys.tol
    zero = HPolytope.point(np.zeros(sys.n_z))
    F = {i: PolyUnion.of(zero) for i in sys.graph.nodes}
    status, l, diverged = ITERATION_CAP, l_max, False
    D = template_directions(sys) if hull_mode and max_vertices is not None else None
    approximated = False
    for step in range(l_max):
        new = {}
        for i in sys.graph.nodes:
            pieces = []
            for s, _, sid in sys.graph.in_edges(i):
                for P in F[s].pieces:
                    img = phi_forward(sys, sid, P)
                    if img is not None:
                        pieces.append(img)
            if pieces and (hull_mode or len(pieces) > tol.max_union):
                pts = np.vstack([Q.vertex_array() for Q in pieces])
                P = hull(pts)
                if D is not None and P.vertex_array().shape[0] > max_vertices:
                    P = template_hull(pts, D)
                    approximated = True
                pieces = [P]
            new[i] = union_prune(PolyUnion(pieces, sys.n_z), tol) if pieces else PolyUnion.empty(sys.n_z)
        if any(np.abs(Q.vertex_array()).max() > bound for U in new.values() for Q in U.pieces):
            F, status, l, diverged = new, ITERATION_CAP, step + 1, True
            break
        if all(_same_point_sets(new[i], F[i], tol) for i in sys.graph.nodes):
            F, status, l = new, CONVERGED, step
            break
        F = new
        if approximated and (step + 1) % check_every == 0:
            X = _outer_invariant(sys, F, D, inflate)
            if X is not None:
                F, status, l = X, OUTER_INVARIANT, step + 1
                break
    inside = all(contains_set(sys.Z, Q, tol) for U in F.values() for Q in U.pieces)
    return ForwardResult(F, status, l, hull_mode, inside, diverged, approximated)


def _outer_invariant(sys: SwitchedSystem, F: dict, D: np.ndarray, inflate: float):
    """Inflated template bounds of ``F`` if they map into themselves along
    every edge, else ``None``."""
    X = {}
    for i, U in F.items():
        if len(U.pieces) != 1:
            return None
        V = U.pieces[0].vertex_array()
        hi, lo = (V @ D.T).max(axis=0), (V @ D.T).min(axis=0)
        X[i] = HPolytope(D, hi + inflate * (hi - lo) + sys.tol.eps_set, dim=sys.n_z)
    for s, d, sid in sys.graph.edges:
        img = phi_forward(sys, sid, X[s])
        if img is not None and not contains_set(X[d], img, sys.tol):
            return None
    return {i: PolyUnion.of(P) for i, P in X.items()}


def _same_point_sets(A: PolyUnion, B: PolyUnion, tol: Tolerances) -> bool:
    """Piecewise mutual cover that also counts lower-dimensional pieces.

    Forward sets are often flat, so volume-based equality would call a
    segment equal to a point.
    """
    def covered(X, Y):
        return all(any(contains_set(Q, P, tol) for Q in Y.pieces) for P in X.pieces)
    return covered(A, B) and covered(B, A)


def check_minimal_set_inside(sys: SwitchedSystem, l_max: int = 50) -> bool:
    """Hull-mode forward iteration; warns when it leaves ``Z``."""
    res = forward_sequence(sys, l_max, hull_mode=True)
    if not res.inside_Z:
        warnings.warn("forward reachable sets leave Z; the safe set may be empty",
                      stacklevel=2)
    return bool(res.inside_Z)


# ----------------------------------------------------------------------
# certificates
# ----------------------------------------------------------------------

def sample_union(U: PolyUnion, n: int, rng: np.random.Generator,
                 max_batches: int = 200) -> np.ndarray:
    """Uniform samples from a union by rejection from its bounding box."""
    from .geometry import union_bounding_box

    lo, hi = union_bounding_box(U)
    out = []
    count = 0
    for _ in range(max_batches):
        X = lo + (hi - lo) * rng.random((max(4 * n, 1000), U.dim))
        X = X[U.contains_points(X, Tolerances(eps_set=1e-12))]
        out.append(X)
        count += X.shape[0]
        if count >= n:
            break
    X = np.vstack(out) if out else np.zeros((0, U.dim))
    return X[:n]


def attack_vertices(A: ParamPolytope, z) -> np.ndarray | None:
    """Vertices of ``A(z)`` (``None`` when empty, one empty row when ``n_a = 0``)."""
    if A.n_a == 0:
        return np.zeros((1, 0))
    P = HPolytope(A.Ga, A.rhs(z), dim=A.n_a)
    if P.is_empty():
        return None
    return P.vertex_array()


def invariance_certificate(sys: SwitchedSystem, result: ReachResult, n_samples: int = 500,
                           seed: int = 0, tol: float | None = None) -> dict:
    """Check on sampled states that every extreme successor stays in the
    multi-set of the destination node."""
    tol = sys.tol.eps_set if tol is None else tol
    ptol = Tolerances(eps_set=tol)
    rng = np.random.default_rng(seed)
    Hv = sys.H.vertex_array()
    failures = []
    checked = 0
    for i in sys.graph.nodes:
        U = result.multiset[i]
        if not U.pieces:
            continue
        Zs = sample_union(U, n_samples, rng)
        for _, d, sid in sys.graph.out_edges(i):
            mode = sys.modes[sid]
            A = sys.stealth[sid]
            EH = Hv @ mode.E.T
            target = result.multiset[d]
            for z in Zs:
                Va = attack_vertices(A, z)
                if Va is None:
                    continue
                base = mode.A @ z
                succ = (base + Va @ mode.B.T)[:, None, :] + EH[None, :, :]
                succ = succ.reshape(-1, sys.n_z)
                ok = target.contains_points(succ, ptol)
                checked += succ.shape[0]
                if not ok.all():
                    failures.append((i, d, sid, z))
    return {"checked": checked, "failures": failures, "passed": not failures}
