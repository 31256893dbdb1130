"""Array-level algorithms: Chebyshev balls, vertex enumeration, hulls, volume.

Vertex enumeration walks the edge graph of the polytope: starting from one
vertex, every edge direction is followed with a ratio test to the adjacent
vertex.  At degenerate vertices (more than ``n`` active rows) the edge
directions are the extreme rays of the active cone, found by trying every
``n-1`` subset of the active rows.  Lower-dimensional polytopes are reduced
to their affine hull first.
"""
from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from ..errors import EmptySet, NumericalFailure, Unbounded
from .lp import OPTIMAL, UNBOUNDED, lp_solve, solve_standard

_RADIUS_CAP = 1e9
_MAX_VERTICES = 200_000
_MAX_RAY_COMBOS = 60_000


def normalize_rows(G, g, zero_tol=1e-12):
    """Scale rows to unit norm.

    Returns ``(G, g, infeasible)``; zero rows are dropped when their offset
    is nonnegative, otherwise ``infeasible`` is set.
    """
    G = np.asarray(G, dtype=float)
    g = np.asarray(g, dtype=float)
    norms = np.linalg.norm(G, axis=1) if G.size else np.zeros(G.shape[0])
    zero = norms <= zero_tol
    infeasible = bool(np.any(g[zero] < -zero_tol)) or bool(np.any(g == -np.inf))
    keep = ~zero & (g < np.inf)
    G = G[keep] / norms[keep, None]
    g = g[keep] / norms[keep]
    return G, g, infeasible


def chebyshev(G, g):
    """Largest inscribed ball of ``{x : G x <= g}`` (rows assumed unit).

    The radius is negative when the set is empty and capped at ``1e9`` for
    unbounded sets.
    """
    m, n = G.shape
    if m == 0:
        return np.zeros(n), _RADIUS_CAP
    Gc = np.hstack([G, np.ones((m, 1))])
    Gc = np.vstack([Gc, np.r_[np.zeros(n), 1.0]])
    gc = np.r_[g, _RADIUS_CAP]
    c = np.r_[np.zeros(n), 1.0]
    res = lp_solve(c, Gc, gc, "max")
    if res.status != OPTIMAL:
        raise NumericalFailure(f"Chebyshev LP returned {res.status}")
    return res.x[:n], float(res.x[n])


def is_bounded(G):
    """``{x : G x <= g}`` is bounded (for any feasible ``g``) iff the
    recession cone ``{d : G d <= 0}`` is trivial, i.e. ``G`` has full column
    rank and ``G.T y = 0`` for some ``y > 0``."""
    m, n = G.shape
    if m <= n or np.linalg.matrix_rank(G) < n:
        return False
    # y = 1 + t, t >= 0:  G.T t = -G.T 1
    sol = solve_standard(G.T, -G.T @ np.ones(m), np.zeros(m))
    return sol.status == OPTIMAL


def _null_space(M, rtol=1e-10):
    if M.shape[0] == 0:
        return np.eye(M.shape[1])
    _, s, vt = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * max(1.0, smax)))
    return vt[rank:].T


def implicit_equalities(G, g, center, tol):
    """Indices of rows that hold with equality on the whole polytope."""
    slack = g - G @ center
    cand = np.flatnonzero(slack <= 1e3 * tol)
    eq = []
    for j in cand:
        res = lp_solve(G[j], G, g, "min")
        if res.status == OPTIMAL and res.value >= g[j] - 1e3 * tol:
            eq.append(j)
    return np.array(eq, dtype=int)


def _refine(G, g, x, tol):
    slack = g - G @ x
    S = slack <= tol
    if S.sum() >= G.shape[1]:
        sol, *_ = np.linalg.lstsq(G[S], g[S], rcond=None)
        if np.abs(sol - x).max() < 1e3 * tol + 1e-9:
            return sol
    return x


def _crash_to_vertex(G, g, x, tol):
    n = G.shape[1]
    for _ in range(n + 1):
        slack = g - G @ x
        S = slack <= tol
        N = _null_space(G[S])
        if N.shape[1] == 0:
            return _refine(G, g, x, tol)
        d = N[:, 0]
        Gd = G @ d
        pos = Gd > 1e-12
        if not pos.any():
            d = -d
            Gd = -Gd
            pos = Gd > 1e-12
            if not pos.any():
                raise Unbounded("polytope is unbounded")
        t = np.min(np.maximum(slack[pos], 0.0) / Gd[pos])
        x = x + t * d
    raise NumericalFailure("could not locate a starting vertex")


def _edge_directions(GS, n):
    """Extreme rays of the pointed cone ``{d : GS d <= 0}``."""
    if n == 1:
        dirs = [np.array([s]) for s in (1.0, -1.0) if np.all(GS[:, 0] * s <= 1e-10)]
        return dirs
    if GS.shape[0] == n:
        try:
            inv = np.linalg.inv(GS)
            if np.isfinite(inv).all():
                return [-inv[:, i] / np.linalg.norm(inv[:, i]) for i in range(n)]
        except np.linalg.LinAlgError:
            pass
    # drop duplicate rows before the combinatorial search
    GS = np.unique(np.round(GS, 12), axis=0)
    k = GS.shape[0]
    if math.comb(k, n - 1) > _MAX_RAY_COMBOS:
        raise NumericalFailure(f"vertex with {k} active rows is too degenerate")
    rays = []
    for T in itertools.combinations(range(k), n - 1):
        M = GS[list(T)]
        _, s, vt = np.linalg.svd(M)
        if s[-1] < 1e-10:
            continue
        u = vt[-1]
        for cand in (u, -u):
            if np.max(GS @ cand) <= 1e-10:
                if not any(np.abs(cand - r).max() < 1e-9 for r in rays):
                    rays.append(cand)
                break
    return rays


def _bfs_vertices(G, g, start, tol):
    n = G.shape[1]
    scale = max(1.0, float(np.abs(g).max(initial=0.0)), float(np.abs(start).max()))
    dedup = 1e-7 * scale
    verts = [start]
    V = np.array(verts)
    queue = deque([start])
    while queue:
        v = queue.popleft()
        slack = g - G @ v
        S = np.flatnonzero(slack <= tol)
        for d in _edge_directions(G[S], n):
            Gd = G @ d
            pos = Gd > 1e-12
            if not pos.any():
                raise Unbounded("polytope is unbounded")
            t = np.min(np.maximum(slack[pos], 0.0) / Gd[pos])
            if t <= tol:
                continue
            w = _refine(G, g, v + t * d, tol)
            if np.min(np.abs(V - w).max(axis=1)) <= dedup:
                continue
            verts.append(w)
            V = np.vstack([V, w])
            queue.append(w)
            if len(verts) > _MAX_VERTICES:
                raise NumericalFailure("vertex count exceeds enumeration cap")
    return V


def enumerate_vertices(G, g, eps=1e-9, _depth=0):
    """All vertices of the bounded polytope ``{x : G x <= g}``.

    Rows must already be unit-normalised.  Raises :class:`EmptySet` or
    :class:`Unbounded`.
    """
    m, n = G.shape
    scale = max(1.0, float(np.abs(g).max(initial=0.0)))
    tol = 1e-9 * scale if eps is None else max(eps, 1e-12) * scale
    if n == 0:
        return np.zeros((1, 0))
    center, radius = chebyshev(G, g)
    if radius < -tol:
        raise EmptySet("polytope is empty")
    if m == 0 or not is_bounded(G):
        raise Unbounded("polytope is unbounded")
    if radius <= 1e2 * tol and _depth < n:
        eq = implicit_equalities(G, g, center, tol)
        if eq.size:
            N = _null_space(G[eq])
            x0, *_ = np.linalg.lstsq(G[eq], g[eq], rcond=None)
            # move x0 into the affine hull close to the Chebyshev center
            x0 = x0 + N @ (N.T @ (center - x0))
            if N.shape[1] == 0:
                return x0[None, :]
            rest = np.setdiff1d(np.arange(m), eq)
            Gr, gr, infeasible = normalize_rows(G[rest] @ N, g[rest] - G[rest] @ x0)
            if infeasible:
                raise EmptySet("polytope is empty")
            Vr = enumerate_vertices(Gr, gr, eps, _depth + 1)
            return x0[None, :] + Vr @ N.T
    start = _crash_to_vertex(G, g, center, tol)
    return _bfs_vertices(G, g, start, tol)


def unique_rows(V, tol=1e-9):
    """Rows of ``V`` with near-duplicates (max-norm ``<= tol``) removed,
    keeping the first occurrence."""
    V = np.asarray(V, dtype=float)
    if V.shape[0] <= 1:
        return V
    # cheap pass on a rounded grid, then the exact tolerance test
    _, idx = np.unique(np.round(V / tol), axis=0, return_index=True)
    V = V[np.sort(idx)]
    pairs = cKDTree(V).query_pairs(tol, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return V
    keep = np.ones(V.shape[0], dtype=bool)
    for i, j in pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]:
        if keep[i]:
            keep[j] = False
    return V[keep]


def affine_frame(V, rtol=1e-9):
    """Centroid, basis of the affine hull and basis of its complement."""
    c = V.mean(axis=0)
    X = V - c
    n = V.shape[1]
    if V.shape[0] == 1:
        return c, np.zeros((n, 0)), np.eye(n)
    _, s, vt = np.linalg.svd(X)
    scale = max(1.0, float(np.abs(V).max()))
    r = int(np.sum(s > rtol * scale))
    return c, vt[:r].T, vt[r:].T


def _qhull(Y):
    try:
        return ConvexHull(Y)
    except QhullError:
        return ConvexHull(Y, qhull_options="QJ")


def hull_hrep(V):
    """Irredundant H-representation ``(G, g)`` of ``conv(V)``."""
    V = unique_rows(np.asarray(V, dtype=float))
    n = V.shape[1]
    c, U, W = affine_frame(V)
    r = U.shape[1]
    rows, offs = [], []
    if r == 1:
        y = (V - c) @ U[:, 0]
        rows += [U[:, 0], -U[:, 0]]
        offs += [y.max() + U[:, 0] @ c, -y.min() - U[:, 0] @ c]
    elif r >= 2:
        Y = (V - c) @ U
        hull = _qhull(Y)
        eqs = np.unique(np.round(hull.equations, 10), axis=0)
        for e in eqs:
            a, b = e[:r], e[r]
            na = np.linalg.norm(a)
            a_full = U @ (a / na)
            rows.append(a_full)
            offs.append(-b / na + a_full @ c)
    for k in range(W.shape[1]):
        w = W[:, k]
        rows += [w, -w]
        offs += [w @ c, -(w @ c)]
    G = np.array(rows).reshape(-1, n)
    g = np.array(offs, dtype=float)
    return G, g


def extreme_points(V):
    """Rows of ``V`` that are vertices of ``conv(V)``."""
    V = unique_rows(np.asarray(V, dtype=float))
    if V.shape[0] <= 1:
        return V
    c, U, _ = affine_frame(V)
    r = U.shape[1]
    if r == 0:
        return V[:1]
    Y = (V - c) @ U
    if r == 1:
        return V[[int(np.argmin(Y[:, 0])), int(np.argmax(Y[:, 0]))]]
    return V[np.sort(_qhull(Y).vertices)]


def hull_volume(V):
    """Volume of ``conv(V)`` by a fan of simplices from the centroid."""
    V = np.asarray(V, dtype=float)
    n = V.shape[1]
    if V.shape[0] <= n:
        return 0.0
    c, U, _ = affine_frame(V)
    if U.shape[1] < n:
        return 0.0
    if n == 1:
        return float(V.max() - V.min())
    hull = _qhull(V)
    total = 0.0
    for simplex in hull.simplices:
        total += abs(np.linalg.det(V[simplex] - c))
    return total / math.factorial(n)
