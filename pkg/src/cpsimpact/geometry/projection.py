"""Fourier-Motzkin elimination, used internally by the exact backward map
of union targets (the bad set is a projection of a lifted polytope)."""
from __future__ import annotations

import numpy as np

from ..errors import NumericalFailure
from .enumeration import normalize_rows
from .polytope import HPolytope, remove_redundancy
from .tolerances import DEFAULT_TOL, Tolerances

_MAX_ROWS = 5000


def _box_filter(G, g, lo, hi, tol):
    """Replace rows implied by the variable bounds ``lo <= x <= hi`` with the
    bounds themselves."""
    if lo is None:
        return G, g
    top = np.where(G > 0, G * hi, G * lo).sum(axis=1)
    keep = top > g + tol
    n = G.shape[1]
    I = np.eye(n)
    return np.vstack([G[keep], I, -I]), np.r_[g[keep], hi, -lo]


def _dedupe(G, g):
    if G.shape[0] <= 1:
        return G, g
    key = np.round(G, 10)
    order = np.lexsort(np.c_[g, key].T[::-1])
    G, g, key = G[order], g[order], key[order]
    first = np.ones(len(g), dtype=bool)
    first[1:] = np.any(key[1:] != key[:-1], axis=1)
    return G[first], g[first]


def fourier_motzkin(P: HPolytope, keep, tol: Tolerances = DEFAULT_TOL,
                    lo=None, hi=None, redundancy: bool = True) -> HPolytope:
    """Projection of ``P`` onto the coordinates ``keep`` (0-based, in order).

    ``lo``/``hi`` are optional finite bounds on all variables that let
    implied rows be discarded without an LP.  The bounds must be implied
    by ``P``; they are added as explicit rows.
    """
    keep = [int(k) for k in keep]
    n = P.dim
    if P.explicitly_empty:
        return HPolytope.empty(len(keep))
    G, g = P.G.copy(), P.g.copy()
    lo = None if lo is None else np.asarray(lo, dtype=float).copy()
    hi = None if hi is None else np.asarray(hi, dtype=float).copy()
    alive = list(range(n))
    elim = [k for k in range(n) if k not in keep]
    eps = 1e-12
    G, g = _box_filter(G, g, lo, hi, tol.eps_feas)
    while elim:
        # cheapest variable first
        costs = []
        for k in elim:
            c = G[:, alive.index(k)]
            costs.append(int((c > eps).sum()) * int((c < -eps).sum()) - len(c))
        k = elim.pop(int(np.argmin(costs)))
        col = alive.index(k)
        c = G[:, col]
        pos, neg = c > eps, c < -eps
        zero = ~(pos | neg)
        Gp, gp = G[pos] / c[pos, None], g[pos] / c[pos]
        Gn, gn = G[neg] / -c[neg, None], g[neg] / -c[neg]
        newG = (Gp[:, None, :] + Gn[None, :, :]).reshape(-1, G.shape[1])
        newg = (gp[:, None] + gn[None, :]).ravel()
        G = np.vstack([G[zero], newG])
        g = np.r_[g[zero], newg]
        G = np.delete(G, col, axis=1)
        alive.pop(col)
        if lo is not None:
            lo = np.delete(lo, col)
            hi = np.delete(hi, col)
        G, g, infeasible = normalize_rows(G, g)
        if infeasible:
            return HPolytope.empty(len(keep))
        G, g = _box_filter(G, g, lo, hi, tol.eps_feas)
        G, g = _dedupe(G, g)
        if redundancy and G.shape[0] > 2 * G.shape[1] + 2:
            Q = remove_redundancy(HPolytope(G, g, dim=G.shape[1], normalize=False), tol)
            if Q.explicitly_empty:
                return HPolytope.empty(len(keep))
            G, g = Q.G, Q.g
        if G.shape[0] > _MAX_ROWS:
            raise NumericalFailure("Fourier-Motzkin elimination produced too many rows")
    perm = [alive.index(k) for k in keep]
    return HPolytope(G[:, perm], g, dim=len(keep))
