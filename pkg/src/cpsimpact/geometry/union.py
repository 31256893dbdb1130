"""Finite unions of H-polytopes.

Exact set algebra on unions reduces to set differences of convex pieces:
``P minus Q`` is the disjoint union of the regions where the first violated
row of ``Q`` is ``k``.  Emptiness of a region is judged by its Chebyshev
radius, so slivers thinner than ``eps_set`` count as empty.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, Unbounded
from .polytope import (HPolytope, bounding_box, contains_set, hull, intersect,
                       remove_redundancy, support, volume)
from .tolerances import DEFAULT_TOL, Tolerances

EXACT = "exact"
STATISTICAL = "statistical"
MONTE_CARLO = "mc"

_MAX_DIFF_REGIONS = 4000
_MAX_MC_SAMPLES = 4_000_000


class PolyUnion:
    """Union of H-polytopes of a common dimension (empty list = empty set)."""

    __slots__ = ("pieces", "dim")

    def __init__(self, pieces, dim: int | None = None):
        pieces = tuple(pieces)
        if dim is None:
            if not pieces:
                raise DimensionMismatch("empty union needs an explicit dimension")
            dim = pieces[0].dim
        for P in pieces:
            if P.dim != dim:
                raise DimensionMismatch("union pieces have different dimensions")
        self.pieces = pieces
        self.dim = dim

    @classmethod
    def of(cls, P: HPolytope) -> "PolyUnion":
        return cls([P], P.dim)

    @classmethod
    def empty(cls, dim: int) -> "PolyUnion":
        return cls([], dim)

    def __len__(self):
        return len(self.pieces)

    def __iter__(self):
        return iter(self.pieces)

    def __repr__(self):
        return f"PolyUnion(dim={self.dim}, pieces={len(self.pieces)})"

    def is_empty(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return all(P.is_empty(tol) for P in self.pieces)

    def contains_point(self, x, tol: Tolerances = DEFAULT_TOL) -> bool:
        return union_contains_point(self, x, tol)

    def contains_points(self, X, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0], dtype=bool)
        for P in self.pieces:
            rest = ~out
            if not rest.any():
                break
            out[rest] = P.contains_points(X[rest], tol)
        return out

    def to_dict(self) -> dict:
        return {"dim": self.dim, "pieces": [P.to_dict() for P in self.pieces]}

    @classmethod
    def from_dict(cls, d: dict, dim: int | None = None) -> "PolyUnion":
        dim = d.get("dim", dim)
        pieces = [HPolytope.from_dict(p, dim) for p in d["pieces"]]
        return cls(pieces, dim)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _canonical_key(P: HPolytope):
    return (P.n_rows, tuple(np.round(P.g, 9)), tuple(np.round(P.G.ravel(), 9)))


def union_prune(U: PolyUnion, tol: Tolerances = DEFAULT_TOL,
                redundancy: bool = True) -> PolyUnion:
    """Drop empty pieces and pieces contained in a single other piece.

    Pieces are put in a canonical order first, so the result does not depend
    on the order in which they were produced.
    """
    pieces = [P for P in U.pieces if not P.is_empty(tol)]
    if redundancy:
        pieces = [remove_redundancy(P, tol) for P in pieces]
    pieces.sort(key=_canonical_key)
    # larger pieces first, so duplicates keep the first copy
    order = sorted(range(len(pieces)), key=lambda i: -pieces[i].chebyshev()[1])
    kept: list[HPolytope] = []
    for i in order:
        P = pieces[i]
        if any(contains_set(Q, P, tol) for Q in kept):
            continue
        kept = [Q for Q in kept if not contains_set(P, Q, tol)]
        kept.append(P)
    kept.sort(key=_canonical_key)
    return PolyUnion(kept, U.dim)


def _convex_union(P: HPolytope, Q: HPolytope, tol: Tolerances):
    """Hull of ``P`` and ``Q`` when their union is convex, else ``None``.

    The union is convex iff the hull has the volume of the union; the
    volume test is confirmed by an exact region difference.
    """
    VP, VQ = P.vertex_array(), Q.vertex_array()
    Hv = hull(np.vstack([VP, VQ]))
    vh = volume(Hv)
    vu = volume(P) + volume(Q) - volume(intersect(P, Q))
    if vh - vu > 1e-9 * max(vh, 1e-300) + 1e-14:
        return None
    if union_subset(PolyUnion([Hv], P.dim), PolyUnion([P, Q], P.dim), tol) is not True:
        return None
    return remove_redundancy(Hv, tol)


def union_merge(U: PolyUnion, tol: Tolerances = DEFAULT_TOL, max_pieces: int = 64) -> PolyUnion:
    """Simplify a union without changing the set it describes.

    Pieces covered by the union of the others are dropped and pairs whose
    union is convex are replaced by their hull, until neither applies.
    """
    U = union_prune(U, tol)
    pieces = list(U.pieces)
    if len(pieces) > max_pieces:
        return U
    changed = True
    while changed and len(pieces) > 1:
        changed = False
        for i in range(len(pieces)):
            others = PolyUnion(pieces[:i] + pieces[i + 1:], U.dim)
            if union_subset(PolyUnion([pieces[i]], U.dim), others, tol) is True:
                pieces.pop(i)
                changed = True
                break
        if changed:
            continue
        for i in range(len(pieces)):
            for j in range(i + 1, len(pieces)):
                M = _convex_union(pieces[i], pieces[j], tol)
                if M is not None:
                    pieces = [p for k, p in enumerate(pieces) if k not in (i, j)] + [M]
                    changed = True
                    break
            if changed:
                break
    return union_prune(PolyUnion(pieces, U.dim), tol)


def union_expand(U: PolyUnion, container: HPolytope, tol: Tolerances = DEFAULT_TOL,
                 max_pieces: int = 64) -> PolyUnion:
    """Enlarge every piece inside the union without changing the union.

    Rows of a piece are dropped greedily (the ``container`` rows are always
    kept, so pieces stay bounded) as long as the enlarged piece remains a
    subset of the union.  The pieces then overlap more, which helps any
    piece-by-piece map that needs a whole convex neighbourhood inside one
    piece.
    """
    if len(U) < 2 or len(U) > max_pieces:
        return U
    grown = []
    for P in U.pieces:
        G, g = P.G, P.g
        keep = np.ones(len(g), dtype=bool)
        for j in range(len(g)):
            if contains_set(HPolytope(G[j][None, :], g[j:j + 1], dim=U.dim, normalize=False),
                            container, tol):
                continue
            keep[j] = False
            cand = intersect(container, HPolytope(G[keep], g[keep], dim=U.dim, normalize=False))
            if union_subset(PolyUnion([cand], U.dim), U, tol) is not True:
                keep[j] = True
        grown.append(intersect(container, HPolytope(G[keep], g[keep], dim=U.dim, normalize=False)))
    return union_prune(PolyUnion(grown, U.dim), tol)


def union_contains_point(U: PolyUnion, x, tol: Tolerances = DEFAULT_TOL) -> bool:
    return any(P.contains_point(x, tol) for P in U.pieces)


def union_intersect(U1: PolyUnion, U2: PolyUnion, tol: Tolerances = DEFAULT_TOL,
                    prune: bool = True) -> PolyUnion:
    """Pairwise intersection of two unions."""
    if U1.dim != U2.dim:
        raise DimensionMismatch("union dimensions differ")
    out = []
    for P in U1.pieces:
        for Q in U2.pieces:
            R = intersect(P, Q)
            if not R.is_empty(tol):
                out.append(R)
    res = PolyUnion(out, U1.dim)
    return union_prune(res, tol) if prune else res


def _thin(P: HPolytope, tol: Tolerances) -> bool:
    return P.explicitly_empty or P.chebyshev()[1] <= tol.eps_set


def polytope_difference(P: HPolytope, Q: HPolytope, tol: Tolerances = DEFAULT_TOL):
    """Convex pieces covering ``P minus Q`` (up to slivers), pairwise disjoint
    in their interiors."""
    if _thin(P, tol):
        return []
    if _thin(intersect(P, Q), tol):
        return [P]
    out = []
    acc = P
    for Gk, gk in zip(Q.G, Q.g):
        if support(acc, Gk) <= gk + tol.eps_set:
            continue
        R = intersect(acc, HPolytope(-Gk[None, :], [-gk], dim=P.dim, normalize=False))
        if not _thin(R, tol):
            out.append(R)
        acc = intersect(acc, HPolytope(Gk[None, :], [gk], dim=P.dim, normalize=False))
        if _thin(acc, tol):
            break
    return out


def union_difference(pieces, U: PolyUnion, tol: Tolerances = DEFAULT_TOL,
                     cap: int = _MAX_DIFF_REGIONS):
    """Convex cover of ``(union of pieces) minus U``; ``None`` if the region
    count exceeds ``cap``."""
    regions = list(pieces)
    for Q in U.pieces:
        nxt = []
        for R in regions:
            nxt.extend(polytope_difference(R, Q, tol))
            if len(nxt) > cap:
                return None
        regions = nxt
        if not regions:
            break
    return regions


def union_subset(A: PolyUnion, B: PolyUnion, tol: Tolerances = DEFAULT_TOL):
    """Whether ``A`` is contained in ``B``.

    Returns ``True``/``False`` when decided exactly, ``None`` when the region
    count of the difference computation exceeds its cap.
    """
    rest = []
    for P in A.pieces:
        if _thin(P, tol):
            continue
        if any(contains_set(Q, P, tol) for Q in B.pieces):
            continue
        rest.append(P)
    if not rest:
        return True
    diff = union_difference(rest, B, tol)
    if diff is None:
        return None
    return len(diff) == 0


@dataclass(frozen=True)
class Equality:
    """Outcome of a set-equality test; truthy when the sets are equal."""

    equal: bool
    mode: str

    def __bool__(self):
        return self.equal


def _piecewise_cover(A: PolyUnion, B: PolyUnion, tol) -> bool:
    return all(_thin(P, tol) or any(contains_set(Q, P, tol) for Q in B.pieces)
               for P in A.pieces)


def multiset_equal(A: PolyUnion, B: PolyUnion, tol: Tolerances = DEFAULT_TOL,
                   rng: np.random.Generator | None = None,
                   allow_difference: bool = True) -> Equality:
    """Equality of two unions.

    Tried in order: piece-by-piece containment (sufficient), exact region
    difference in both directions, and finally a seeded sampling test of the
    symmetric difference whose answer is flagged ``statistical``.
    """
    if A.dim != B.dim:
        raise DimensionMismatch("union dimensions differ")
    if _piecewise_cover(A, B, tol) and _piecewise_cover(B, A, tol):
        return Equality(True, EXACT)
    a_empty, b_empty = A.is_empty(tol), B.is_empty(tol)
    if a_empty or b_empty:
        return Equality(a_empty and b_empty, EXACT)
    if allow_difference:
        ab = union_subset(A, B, tol)
        if ab is False:
            return Equality(False, EXACT)
        ba = union_subset(B, A, tol)
        if ba is False:
            return Equality(False, EXACT)
        if ab and ba:
            return Equality(True, EXACT)
    rng = np.random.default_rng(tol.rng_seed) if rng is None else rng
    lo, hi = union_bounding_box(PolyUnion(A.pieces + B.pieces, A.dim))
    X = lo + (hi - lo) * rng.random((max(tol.mc_samples, 10_000), A.dim))
    inA, inB = A.contains_points(X, tol), B.contains_points(X, tol)
    box = float(np.prod(hi - lo))
    sym = np.mean(inA != inB) * box
    vmin = min(np.mean(inA), np.mean(inB)) * box
    return Equality(bool(sym <= tol.eps_set * vmin), STATISTICAL)


def union_bounding_box(U: PolyUnion):
    if not U.pieces:
        raise ValueError("bounding box of an empty union")
    boxes = [bounding_box(P) for P in U.pieces if not P.is_empty()]
    if not boxes:
        raise ValueError("bounding box of an empty union")
    lo = np.min([b[0] for b in boxes], axis=0)
    hi = np.max([b[1] for b in boxes], axis=0)
    return lo, hi


def disjoint_decomposition(U: PolyUnion, tol: Tolerances = DEFAULT_TOL,
                           cap: int = _MAX_DIFF_REGIONS):
    """Interior-disjoint convex pieces with the same union; ``None`` over cap."""
    out = []
    seen = []
    for P in U.pieces:
        if _thin(P, tol):
            continue
        new = union_difference([P], PolyUnion(seen, U.dim), tol, cap)
        if new is None or len(out) + len(new) > cap:
            return None
        out.extend(new)
        seen.append(P)
    return out


def union_volume(U: PolyUnion, tol: Tolerances = DEFAULT_TOL,
                 method: str = "auto", rng: np.random.Generator | None = None):
    """Volume of a union as ``(value, mode)``.

    ``exact`` sums the volumes of an interior-disjoint decomposition;
    ``mc`` samples the bounding box until the 95% confidence half-width is
    below ``eps_vol`` relative.  ``auto`` tries the exact path first.
    """
    if method not in ("auto", "exact", "mc"):
        raise ValueError("method must be auto, exact or mc")
    pieces = [P for P in U.pieces if not P.is_empty(tol)]
    for P in pieces:
        if not P.is_bounded():
            raise Unbounded("volume of an unbounded union")
    if not pieces:
        return 0.0, EXACT
    if len(pieces) == 1 and method != "mc":
        return volume(pieces[0]), EXACT
    if method != "mc":
        parts = disjoint_decomposition(PolyUnion(pieces, U.dim), tol)
        if parts is not None:
            return float(sum(volume(P) for P in parts)), EXACT
        if method == "exact":
            raise RuntimeError("exact union volume exceeded the region cap")
    return _mc_volume(PolyUnion(pieces, U.dim), tol, rng), MONTE_CARLO


def _mc_volume(U: PolyUnion, tol: Tolerances, rng) -> float:
    from scipy.stats import qmc

    rng = np.random.default_rng(tol.rng_seed) if rng is None else rng
    lo, hi = union_bounding_box(U)
    box = float(np.prod(hi - lo))
    if box <= 0:
        return 0.0
    hits = total = 0
    batch = tol.mc_samples
    while True:
        sampler = qmc.Sobol(U.dim, scramble=True, seed=rng)
        m = int(np.ceil(np.log2(batch)))
        X = lo + (hi - lo) * sampler.random_base2(m)
        hits += int(U.contains_points(X, tol).sum())
        total += X.shape[0]
        p = hits / total
        if p > 0:
            half = 1.96 * np.sqrt(p * (1 - p) / total)
            if half <= tol.eps_vol * p:
                break
        if total >= _MAX_MC_SAMPLES:
            break
        batch = total
    return p * box
