"""Dense two-phase tableau simplex.

The polytopes handled by this package live in at most a handful of
dimensions and carry at most a few hundred inequalities, so a dense tableau
is both simpler and faster than calling out to a general purpose solver.

Pivoting uses Dantzig's rule and falls back to Bland's rule once a run of
degenerate pivots is observed; a hard iteration cap turns any remaining
cycling into :class:`NumericalFailure`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..errors import DimensionMismatch, NumericalFailure

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIVOT_TOL = 1e-11
_COST_TOL = 1e-11
_DEGENERATE_RUN = 30


@dataclass(frozen=True)
class LPResult:
    status: str
    x: np.ndarray | None
    value: float
    dual: np.ndarray | None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _StdSolution:
    status: str
    x: np.ndarray | None
    basis: np.ndarray | None
    rows: np.ndarray | None


def _pivot(T, r, s):
    T[r] /= T[r, s]
    col = T[:, s].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run_simplex(T, basis, n_enter, maxiter, bland=False):
    """Minimise the objective stored in the last row of ``T``.

    Only the first ``n_enter`` columns may enter the basis.  Returns
    ``"optimal"`` or ``"unbounded"``.
    """
    m = T.shape[0] - 1
    degenerate = 0
    for _ in range(maxiter):
        d = T[-1, :n_enter]
        if bland:
            cand = np.flatnonzero(d < -_COST_TOL)
            if cand.size == 0:
                return OPTIMAL
            s = int(cand[0])
        else:
            s = int(np.argmin(d))
            if d[s] >= -_COST_TOL:
                return OPTIMAL
        col = T[:m, s]
        pos = col > _PIVOT_TOL
        if not pos.any():
            return UNBOUNDED
        rhs = T[:m, -1]
        ratios = np.full(m, np.inf)
        ratios[pos] = np.maximum(rhs[pos], 0.0) / col[pos]
        theta = ratios.min()
        ties = np.flatnonzero(ratios <= theta + 1e-12 * (1.0 + abs(theta)))
        if bland:
            r = int(ties[np.argmin(basis[ties])])
        else:
            r = int(ties[np.argmax(col[ties])])
        if theta <= 1e-12:
            degenerate += 1
            if degenerate > _DEGENERATE_RUN:
                bland = True
        else:
            degenerate = 0
        _pivot(T, r, s)
        basis[r] = s
    raise NumericalFailure(f"simplex did not terminate within {maxiter} pivots")


def solve_standard(A, b, c, maxiter=None) -> _StdSolution:
    """Solve ``min c.x  s.t.  A x = b, x >= 0`` by the two-phase method."""
    A = np.array(A, dtype=float, ndmin=2)
    b = np.array(b, dtype=float).ravel()
    c = np.array(c, dtype=float).ravel()
    m, n = A.shape
    if b.size != m or c.size != n:
        raise DimensionMismatch("inconsistent standard-form LP dimensions")
    if maxiter is None:
        maxiter = 50 * (m + n) + 100

    sign = np.where(b < 0, -1.0, 1.0)
    As = A * sign[:, None]
    bs = b * sign

    # Use an existing identity column as the starting basic variable where
    # possible; otherwise add an artificial.
    basis = np.full(m, -1, dtype=int)
    for j in range(n):
        colj = As[:, j]
        nz = np.flatnonzero(np.abs(colj) > 0)
        if nz.size == 1 and colj[nz[0]] > 0 and basis[nz[0]] < 0:
            # scale row so the coefficient is exactly one
            r = nz[0]
            if abs(colj[r] - 1.0) < 1e-15:
                basis[r] = j
    need = np.flatnonzero(basis < 0)
    n_art = need.size
    T = np.zeros((m + 1, n + n_art + 1))
    T[:m, :n] = As
    T[:m, -1] = bs
    for k, r in enumerate(need):
        T[r, n + k] = 1.0
        basis[r] = n + k

    if n_art:
        T[-1, n:n + n_art] = 1.0
        for r in need:
            T[-1] -= T[r]
        _run_simplex(T, basis, n + n_art, maxiter)
        scale = 1.0 + np.abs(bs).max(initial=0.0)
        if -T[-1, -1] > 1e-9 * scale:
            return _StdSolution(INFEASIBLE, None, None, None)
        # drive artificials out of the basis; drop rows that are redundant
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n:
                row = T[r, :n]
                j = int(np.argmax(np.abs(row)))
                if abs(row[j]) > 1e-9:
                    _pivot(T, r, j)
                    basis[r] = j
                else:
                    keep[r] = False
        rows = np.flatnonzero(keep)
        T = np.vstack([T[rows], T[-1:]])
        T = np.delete(T, np.s_[n:n + n_art], axis=1)
        basis = basis[rows]
    else:
        rows = np.arange(m)

    T[-1, :] = 0.0
    T[-1, :n] = c
    for i, j in enumerate(basis):
        if c[j] != 0.0:
            T[-1] -= c[j] * T[i]
    status = _run_simplex(T, basis, n, maxiter)
    if status == UNBOUNDED:
        return _StdSolution(UNBOUNDED, None, basis, rows)

    x = np.zeros(n)
    B = A[np.ix_(rows, basis)]
    try:
        x[basis] = np.linalg.solve(B, b[rows])
    except np.linalg.LinAlgError:
        x[basis] = T[:-1, -1]
    if (x < -1e-7 * (1.0 + np.abs(x).max())).any():
        # refined solve drifted; the tableau value is the safer answer
        x[:] = 0.0
        x[basis] = T[:-1, -1]
    np.maximum(x, 0.0, out=x)
    return _StdSolution(OPTIMAL, x, basis, rows)


def lp_solve(c, G, g, sense: Literal["max", "min"] = "max") -> LPResult:
    """Optimise ``c.x`` over ``{x : G x <= g}`` with ``x`` free.

    Returns the status, a basic optimal point, the optimal value and the
    multipliers ``y >= 0`` of the inequality rows (``G.T y = +-c``).
    """
    c = np.asarray(c, dtype=float).ravel()
    G = np.asarray(G, dtype=float)
    g = np.asarray(g, dtype=float).ravel()
    if G.ndim != 2:
        G = G.reshape(len(g), -1) if G.size else np.zeros((len(g), c.size))
    m, n = G.shape
    if n != c.size or m != g.size:
        raise DimensionMismatch(
            f"lp_solve: c has {c.size} entries, G is {G.shape}, g has {g.size}")
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    sgn = 1.0 if sense == "max" else -1.0

    if m == 0:
        if np.any(c != 0):
            return LPResult(UNBOUNDED, None, sgn * np.inf, None)
        return LPResult(OPTIMAL, np.zeros(n), 0.0, np.zeros(0))

    # x = xp - xn, slack s:  [G, -G, I] [xp; xn; s] = g,  min -sgn c.x
    A = np.hstack([G, -G, np.eye(m)])
    cost = np.concatenate([-sgn * c, sgn * c, np.zeros(m)])
    sol = solve_standard(A, g, cost)
    if sol.status == INFEASIBLE:
        return LPResult(INFEASIBLE, None, -sgn * np.inf, None)
    if sol.status == UNBOUNDED:
        return LPResult(UNBOUNDED, None, sgn * np.inf, None)
    x = sol.x[:n] - sol.x[n:2 * n]
    # multipliers from the final basis: B^T y = c_B, then flip to the
    # nonnegative convention of the inequality form
    dual = np.zeros(m)
    B = A[np.ix_(sol.rows, sol.basis)]
    try:
        y = np.linalg.solve(B.T, cost[sol.basis])
        dual[sol.rows] = np.maximum(-y, 0.0)
    except np.linalg.LinAlgError:
        pass
    return LPResult(OPTIMAL, x, float(c @ x), dual)
