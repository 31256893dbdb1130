"""Convex polytopes in half-space (H) and vertex (V) form."""
from __future__ import annotations

import json

import numpy as np

from ..errors import DimensionMismatch, EmptySet, NotCSet, Unbounded
from .enumeration import (chebyshev, enumerate_vertices, extreme_points, hull_hrep,
                          hull_volume, is_bounded, normalize_rows, unique_rows)
from .lp import OPTIMAL, UNBOUNDED, lp_solve
from .tolerances import DEFAULT_TOL, Tolerances


class HPolytope:
    """The set ``{x : G x <= g}``.

    Rows are scaled to unit Euclidean norm at construction.  Zero rows with a
    nonnegative offset are dropped; a zero row with a negative offset makes
    the polytope explicitly empty, which is stored as the single row
    ``0 x <= -1``.

    Instances are treated as immutable; derived quantities (Chebyshev ball,
    vertices, irredundant form) are cached on first use.
    """

    __slots__ = ("G", "g", "_cache")

    def __init__(self, G, g, dim: int | None = None, *, normalize: bool = True):
        g = np.atleast_1d(np.asarray(g, dtype=float)).ravel()
        G = np.asarray(G, dtype=float)
        if G.size == 0:
            if dim is None:
                dim = G.shape[1] if G.ndim == 2 else 0
            G = np.zeros((0, dim))
        elif G.ndim == 1:
            G = G.reshape(len(g), -1) if len(g) else G[None, :]
        if G.shape[0] != g.size:
            raise DimensionMismatch(f"G has {G.shape[0]} rows but g has {g.size}")
        if dim is not None and G.shape[1] != dim:
            raise DimensionMismatch(f"G has {G.shape[1]} columns, expected {dim}")
        n = G.shape[1]
        infeasible = False
        if normalize:
            G, g, infeasible = normalize_rows(G, g)
        if infeasible:
            G, g = np.zeros((1, n)), np.array([-1.0])
        G.setflags(write=False)
        g.setflags(write=False)
        self.G = G
        self.g = g
        self._cache = {}

    # -- constructors -----------------------------------------------------
    @classmethod
    def box(cls, lb, ub) -> "HPolytope":
        lb = np.atleast_1d(np.asarray(lb, dtype=float))
        ub = np.atleast_1d(np.asarray(ub, dtype=float))
        if lb.shape != ub.shape:
            raise DimensionMismatch("box bounds of different length")
        n = lb.size
        return cls(np.vstack([np.eye(n), -np.eye(n)]), np.r_[ub, -lb])

    @classmethod
    def ball_inf(cls, radius: float, n: int) -> "HPolytope":
        return cls.box(-radius * np.ones(n), radius * np.ones(n))

    @classmethod
    def point(cls, x) -> "HPolytope":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls.box(x, x)

    @classmethod
    def empty(cls, n: int) -> "HPolytope":
        return cls(np.zeros((1, n)), [-1.0])

    @classmethod
    def universe(cls, n: int) -> "HPolytope":
        return cls(np.zeros((0, n)), np.zeros(0), dim=n)

    # -- basic properties -------------------------------------------------
    @property
    def dim(self) -> int:
        return self.G.shape[1]

    @property
    def n_rows(self) -> int:
        return self.G.shape[0]

    @property
    def explicitly_empty(self) -> bool:
        return self.G.shape[0] == 1 and not self.G.any() and self.g[0] < 0

    def __repr__(self):
        return f"HPolytope(dim={self.dim}, rows={self.n_rows})"

    def chebyshev(self):
        """Center and radius of the largest inscribed ball (radius < 0 iff empty)."""
        if "cheb" not in self._cache:
            if self.explicitly_empty:
                self._cache["cheb"] = (np.zeros(self.dim), -1.0)
            else:
                self._cache["cheb"] = chebyshev(self.G, self.g)
        return self._cache["cheb"]

    def is_empty(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        if self.explicitly_empty:
            return True
        return self.chebyshev()[1] < -tol.eps_feas * max(1.0, np.abs(self.g).max(initial=0))

    def is_bounded(self) -> bool:
        if "bounded" not in self._cache:
            self._cache["bounded"] = self.explicitly_empty or is_bounded(self.G)
        return self._cache["bounded"]

    def is_full_dim(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        return self.chebyshev()[1] > tol.eps_set

    def is_cset(self, tol: Tolerances = DEFAULT_TOL) -> bool:
        """Bounded with the origin strictly inside."""
        if self.explicitly_empty or self.n_rows == 0:
            return False
        return bool(np.all(self.g > tol.eps_set)) and self.is_bounded()

    def contains_point(self, x, tol: Tolerances = DEFAULT_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch("point dimension does not match polytope")
        if self.explicitly_empty:
            return False
        return bool(np.all(self.G @ x <= self.g + tol.eps_set))

    def contains_points(self, X, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.explicitly_empty:
            return np.zeros(X.shape[0], dtype=bool)
        if self.n_rows == 0:
            return np.ones(X.shape[0], dtype=bool)
        return np.all(X @ self.G.T <= self.g + tol.eps_set, axis=1)

    # -- derived representations -------------------------------------------
    def vertex_array(self) -> np.ndarray:
        if "V" not in self._cache:
            if self.explicitly_empty:
                raise EmptySet("polytope is empty")
            self._cache["V"] = enumerate_vertices(self.G, self.g)
        return self._cache["V"]

    def vertices(self) -> "VPolytope":
        return VPolytope(self.vertex_array())

    def support(self, q, tol: Tolerances = DEFAULT_TOL) -> float:
        return support(self, q, tol)

    def support_many(self, Q) -> np.ndarray:
        return support_many(self, Q)

    def scale(self, lam: float) -> "HPolytope":
        """``lam * P`` for ``lam > 0``."""
        if lam <= 0:
            raise ValueError("scale factor must be positive")
        out = HPolytope(self.G, lam * self.g, normalize=False)
        if "V" in self._cache:
            out._cache["V"] = lam * self._cache["V"]
        return out

    def __and__(self, other):
        return intersect(self, other)

    # -- serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        return {"G": self.G.tolist(), "g": self.g.tolist()}

    @classmethod
    def from_dict(cls, d: dict, dim: int | None = None) -> "HPolytope":
        if "lb" in d or "ub" in d:
            return cls.box(d["lb"], d["ub"])
        G = np.asarray(d["G"], dtype=float)
        if G.size == 0 and dim is None:
            dim = d.get("dim")
        return cls(G, d["g"], dim=dim)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "HPolytope":
        return cls.from_dict(json.loads(s))


class VPolytope:
    """Convex hull of a finite point list; duplicates are merged."""

    __slots__ = ("V",)

    def __init__(self, vertices, tol: float = 1e-9):
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        if V.shape[0] == 0:
            raise EmptySet("a V-polytope needs at least one point")
        V = unique_rows(V, tol)
        V.setflags(write=False)
        self.V = V

    @property
    def dim(self) -> int:
        return self.V.shape[1]

    def __len__(self):
        return self.V.shape[0]

    def __repr__(self):
        return f"VPolytope(dim={self.dim}, vertices={len(self)})"

    def to_dict(self) -> dict:
        return {"V": self.V.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "VPolytope":
        return cls(d["V"])


def _check_dims(P, Q):
    if P.dim != Q.dim:
        raise DimensionMismatch(f"dimensions {P.dim} and {Q.dim} differ")


def support(P: HPolytope, q, tol: Tolerances = DEFAULT_TOL) -> float:
    """``max_{x in P} q.x``."""
    q = np.asarray(q, dtype=float).ravel()
    if q.size != P.dim:
        raise DimensionMismatch("direction dimension does not match polytope")
    if "V" in P._cache:
        return float(np.max(P._cache["V"] @ q))
    if P.explicitly_empty:
        raise EmptySet("support of an empty set")
    res = lp_solve(q, P.G, P.g, "max")
    if res.status == OPTIMAL:
        return res.value
    if res.status == UNBOUNDED:
        raise Unbounded("support function is unbounded in this direction")
    raise EmptySet("support of an empty set")


def support_many(P: HPolytope, Q) -> np.ndarray:
    """Support values for every row of ``Q``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[0] == 0:
        return np.zeros(0)
    if "V" in P._cache:
        return np.max(P._cache["V"] @ Q.T, axis=0)
    return np.array([support(P, q) for q in Q])


def intersect(P: HPolytope, Q: HPolytope) -> HPolytope:
    _check_dims(P, Q)
    if P.explicitly_empty:
        return P
    if Q.explicitly_empty:
        return Q
    return HPolytope(np.vstack([P.G, Q.G]), np.r_[P.g, Q.g], dim=P.dim, normalize=False)


def intersect_halfspaces(P: HPolytope, G, g) -> HPolytope:
    G = np.atleast_2d(np.asarray(G, dtype=float))
    return intersect(P, HPolytope(G, g, dim=P.dim))


def is_empty(P: HPolytope, tol: Tolerances = DEFAULT_TOL) -> bool:
    return P.is_empty(tol)


def contains_point(P: HPolytope, x, tol: Tolerances = DEFAULT_TOL) -> bool:
    return P.contains_point(x, tol)


def contains_set(P: HPolytope, Q: HPolytope, tol: Tolerances = DEFAULT_TOL) -> bool:
    """``Q`` is a subset of ``P`` (up to ``eps_set`` on every row of ``P``)."""
    _check_dims(P, Q)
    if Q.is_empty(tol):
        return True
    if P.explicitly_empty:
        return False
    if "V" in Q._cache:
        return bool(np.all(Q._cache["V"] @ P.G.T <= P.g + tol.eps_set))
    for Gj, gj in zip(P.G, P.g):
        res = lp_solve(Gj, Q.G, Q.g, "max")
        if res.status == UNBOUNDED:
            return False
        if res.status == OPTIMAL and res.value > gj + tol.eps_set:
            return False
    return True


def remove_redundancy(P: HPolytope, tol: Tolerances = DEFAULT_TOL) -> HPolytope:
    """Irredundant H-representation of ``P``; empty sets come back explicit."""
    if P.explicitly_empty or P._cache.get("irredundant"):
        return P
    if P.is_empty(tol):
        return HPolytope.empty(P.dim)
    G, g = P.G, P.g
    # identical normals: keep the tightest offset
    key = np.round(G, 11)
    order = np.lexsort(np.c_[g, key].T[::-1])
    G, g, key = G[order], g[order], key[order]
    first = np.ones(len(g), dtype=bool)
    first[1:] = np.any(key[1:] != key[:-1], axis=1)
    G, g = G[first], g[first]

    keep = np.ones(len(g), dtype=bool)
    for j in range(len(g)):
        keep[j] = False
        Gk = np.vstack([G[keep], G[j]])
        gk = np.r_[g[keep], g[j] + 1.0]
        res = lp_solve(G[j], Gk, gk, "max")
        if res.status != OPTIMAL or res.value > g[j] + tol.eps_feas:
            keep[j] = True
    out = HPolytope(G[keep], g[keep], dim=P.dim, normalize=False)
    out._cache.update({k: v for k, v in P._cache.items() if k in ("cheb", "V", "bounded")})
    out._cache["irredundant"] = True
    return out


def vertices(P: HPolytope) -> VPolytope:
    return P.vertices()


def hull(V) -> HPolytope:
    """H-representation of the convex hull of a V-polytope or point array."""
    pts = V.V if isinstance(V, VPolytope) else np.atleast_2d(np.asarray(V, dtype=float))
    G, g = hull_hrep(pts)
    out = HPolytope(G, g, dim=pts.shape[1])
    out._cache["V"] = extreme_points(pts)
    return out


def affine_preimage(P: HPolytope, M, b=None) -> HPolytope:
    """``{z : M z + b in P}``; exact in H-form."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != P.dim:
        raise DimensionMismatch("map output dimension does not match polytope")
    if P.explicitly_empty:
        return HPolytope.empty(M.shape[1])
    b = np.zeros(P.dim) if b is None else np.asarray(b, dtype=float).ravel()
    return HPolytope(P.G @ M, P.g - P.G @ b, dim=M.shape[1])


def affine_image(P: HPolytope, M, b=None) -> HPolytope:
    """``{M x + b : x in P}``; via the inverse map when ``M`` is invertible,
    otherwise by mapping vertices and taking the hull."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != P.dim:
        raise DimensionMismatch("map input dimension does not match polytope")
    b = np.zeros(M.shape[0]) if b is None else np.asarray(b, dtype=float).ravel()
    if P.explicitly_empty:
        return HPolytope.empty(M.shape[0])
    if M.shape[0] == M.shape[1] and np.linalg.cond(M) < 1e8:
        Minv = np.linalg.inv(M)
        out = HPolytope(P.G @ Minv, P.g + P.G @ Minv @ b, dim=M.shape[0])
        if "V" in P._cache:
            out._cache["V"] = P._cache["V"] @ M.T + b
        return out
    V = P.vertex_array() @ M.T + b
    return hull(V)


def minkowski_sum(P: HPolytope, Q: HPolytope) -> HPolytope:
    _check_dims(P, Q)
    if P.is_empty() or Q.is_empty():
        return HPolytope.empty(P.dim)
    VP, VQ = P.vertex_array(), Q.vertex_array()
    S = (VP[:, None, :] + VQ[None, :, :]).reshape(-1, P.dim)
    return hull(S)


def erode(P: HPolytope, Q: HPolytope) -> HPolytope:
    """Pontryagin difference ``{x : x + Q subset of P}``."""
    _check_dims(P, Q)
    if P.explicitly_empty:
        return P
    if Q.is_empty():
        return HPolytope.universe(P.dim)
    return HPolytope(P.G, P.g - support_many(Q, P.G), dim=P.dim, normalize=False)


def slice_(P: HPolytope, fixed_dims, values) -> HPolytope:
    """Section of ``P`` with the coordinates ``fixed_dims`` (0-based) pinned
    to ``values``; the result lives in the remaining coordinates."""
    fixed = np.atleast_1d(np.asarray(fixed_dims, dtype=int))
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if fixed.size != values.size:
        raise DimensionMismatch("one value per fixed dimension is required")
    if np.any(fixed < 0) or np.any(fixed >= P.dim) or len(set(fixed.tolist())) != fixed.size:
        raise DimensionMismatch("invalid slice dimensions")
    free = np.setdiff1d(np.arange(P.dim), fixed)
    if P.explicitly_empty:
        return HPolytope.empty(free.size)
    return HPolytope(P.G[:, free], P.g - P.G[:, fixed] @ values, dim=free.size)


def volume(P: HPolytope) -> float:
    """Lebesgue measure (exact up to rounding, via a simplex fan)."""
    if P.is_empty():
        return 0.0
    if not P.is_bounded():
        raise Unbounded("volume of an unbounded set")
    if not P.is_full_dim():
        return 0.0
    return hull_volume(P.vertex_array())


def minkowski_distance(S1: HPolytope, S2: HPolytope, tol: Tolerances = DEFAULT_TOL,
                       check: bool = True) -> float:
    """Largest ``lam >= 0`` with ``lam * S1`` inside ``S2``.

    With ``check`` both arguments must be C-sets; otherwise any nonempty
    bounded ``S1`` containing the origin is accepted and the result is
    clamped at zero.
    """
    _check_dims(S1, S2)
    if check:
        if not S1.is_cset(tol):
            raise NotCSet("first argument is not a C-set")
        if not S2.is_cset(tol):
            raise NotCSet("second argument is not a C-set")
    if S2.n_rows == 0:
        return np.inf
    h = support_many(S1, S2.G)
    ratios = np.full(S2.n_rows, np.inf)
    pos = h > tol.eps_feas
    ratios[pos] = S2.g[pos] / h[pos]
    # rows S1 does not reach (h <= 0) bound lam only when g < 0
    neg = ~pos & (S2.g < -tol.eps_set)
    ratios[neg] = 0.0
    return float(max(0.0, ratios.min()))


def bounding_box(P: HPolytope):
    n = P.dim
    if "V" in P._cache:
        V = P._cache["V"]
        return V.min(axis=0), V.max(axis=0)
    E = np.eye(n)
    ub = support_many(P, E)
    lb = -support_many(P, -E)
    return lb, ub


def cartesian_product(P: HPolytope, Q: HPolytope) -> HPolytope:
    m1, m2 = P.n_rows, Q.n_rows
    G = np.zeros((m1 + m2, P.dim + Q.dim))
    G[:m1, :P.dim] = P.G
    G[m1:, P.dim:] = Q.G
    return HPolytope(G, np.r_[P.g, Q.g], dim=P.dim + Q.dim, normalize=False)
