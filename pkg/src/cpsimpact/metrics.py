"""Impact metrics comparing attacked and attack-free maximal safe sets.

``I1`` is the relative volume loss and ``I2 = 1 - mu`` where ``mu`` is the
largest scaling of the attack-free safe set that fits inside the attacked
one.  Both lie in ``[0, 1]`` and equal one for an empty attacked safe set.
"""
from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NominalEmpty, NotSubset, NumericalFailure
from .geometry import (DEFAULT_TOL, EXACT, HPolytope, PolyUnion, Tolerances,
                       minkowski_distance, slice_, union_subset, union_volume)

MU_EXACT = "exact"
MU_PIECE_MAX = "per-piece-max"

CSV_COLUMNS = ("n_max", "I1", "I2", "vol_nominal", "vol_attacked", "mu",
               "volume_mode", "mu_mode", "status")


@dataclass
class ImpactReport:
    vol_nominal: float
    vol_attacked: float
    I1: float
    I2: float
    mu: float
    volume_mode: str
    mu_mode: str
    scenario: str = ""
    n_max: int | None = None
    status: str = ""

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in CSV_COLUMNS}


def _as_union(S) -> PolyUnion:
    if isinstance(S, HPolytope):
        return PolyUnion.of(S)
    return S


def _nominal_piece(S0: PolyUnion, tol) -> HPolytope:
    pieces = [P for P in S0.pieces if not P.is_empty(tol)]
    if not pieces:
        raise NominalEmpty("attack-free safe set is empty")
    if len(pieces) > 1:
        raise NotImplementedError("the attack-free safe set must be convex")
    P = pieces[0]
    if not P.is_cset(tol):
        raise NominalEmpty("attack-free safe set is not a C-set")
    return P


def _clamp(x: float, eps: float, name: str) -> float:
    if x < -eps or x > 1 + eps:
        raise NumericalFailure(f"{name}={x} outside [0, 1]")
    return float(min(1.0, max(0.0, x)))


def impact(S0, S, tol: Tolerances = DEFAULT_TOL, check_subset: bool = True,
           rng: np.random.Generator | None = None, scenario: str = "") -> ImpactReport:
    """Metrics of the attacked safe set ``S`` against the attack-free ``S0``.

    ``mu`` is computed per convex piece of ``S`` and the maximum is kept;
    that never overestimates ``mu``, so ``I2`` is never underestimated.
    """
    S0, S = _as_union(S0), _as_union(S)
    P0 = _nominal_piece(S0, tol)
    v0 = float(union_volume(S0, tol)[0])
    pieces = [P for P in S.pieces if not P.is_empty(tol) and P.is_full_dim(tol)]
    if not pieces:
        return ImpactReport(v0, 0.0, 1.0, 1.0, 0.0, EXACT, MU_EXACT, scenario)
    S = PolyUnion(pieces, S.dim)
    if check_subset and union_subset(S, S0, tol) is False:
        raise NotSubset("attacked safe set is not inside the attack-free one")
    if union_subset(S0, S, tol) is True:
        # equal sets: no degradation, without rounding noise
        return ImpactReport(v0, v0, 0.0, 0.0, 1.0, EXACT, MU_EXACT, scenario)
    v, vmode = union_volume(S, tol, rng=rng)
    v = float(v)
    mus = [minkowski_distance(P0, P, tol, check=False) for P in pieces]
    mu = min(1.0, max(mus))
    mu_mode = MU_EXACT if len(pieces) == 1 else MU_PIECE_MAX
    eps = 1e-9 if vmode == EXACT else 3 * tol.eps_vol
    I1 = _clamp((v0 - v) / v0, eps, "I1")
    I2 = _clamp(1.0 - mu, 1e-9, "I2")
    return ImpactReport(v0, v, I1, I2, mu, vmode, mu_mode, scenario)


def slice_union(S, dims, values) -> PolyUnion:
    """Full-dimensional pieces of the slice of a union at fixed coordinates."""
    S = _as_union(S)
    keep = S.dim - len(dims)
    out = []
    for P in S.pieces:
        Q = slice_(P, dims, values)
        if not Q.is_empty() and Q.is_full_dim():
            out.append(Q)
    return PolyUnion(out, keep)


def impact_sweep(scenario, n_values, tol: Tolerances | None = None, method: str | None = None,
                 l_max: int | None = None, slice_dims=None, progress=None) -> list:
    """One :class:`ImpactReport` per ``n_max``.

    With ``slice_dims = (dims, values)`` the metrics are computed on that
    slice of both safe sets instead of the full augmented sets.
    """
    from .reach import EMPTY, backward_sequence

    tol = scenario.tol if tol is None else tol
    method = scenario.method if method is None else method
    l_max = scenario.lmax if l_max is None else l_max
    nom = backward_sequence(scenario.nominal().system, l_max, method)
    S0 = nom.safe_set
    if slice_dims is not None:
        S0 = slice_union(S0, *slice_dims)
    rows = []
    for n in n_values:
        res = backward_sequence(scenario.with_n_max(int(n)).system, l_max, method)
        S = PolyUnion.empty(S0.dim) if res.status == EMPTY else res.safe_set
        if slice_dims is not None and S.pieces:
            S = slice_union(S, *slice_dims)
        # per-row stream derived from the master seed
        row_rng = np.random.default_rng([scenario.seed, int(n)])
        rep = impact(S0, S, tol, rng=row_rng, scenario=scenario.name)
        rep.n_max = int(n)
        rep.status = res.status
        rows.append(rep)
        if progress is not None:
            progress(rep)
    return rows


def sweep_csv(rows) -> str:
    """CSV text with the columns of :data:`CSV_COLUMNS`."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        d = r.row()
        for k in ("I1", "I2", "vol_nominal", "vol_attacked", "mu"):
            d[k] = repr(float(d[k]))
        w.writerow(d)
    return buf.getvalue()
