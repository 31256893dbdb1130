"""State-dependent sets of stealthy attacks and their robustification.

For a mode ``sigma`` the admissible attacks at state ``z`` form the polytope

    A(z) = {a : Ga a <= h0 + H z}

collecting the input constraint on the corrupted command, the output
constraint on the corrupted reading, the detector constraint on the residual
(both robust to measurement noise) and optional magnitude bounds.

``robustify`` turns ``max_{a in A(z)} q.a`` into a finite description: by LP
duality the maximum equals ``min_k (c_k.z + d_k)`` over the vertices ``y_k``
of ``{y >= 0 : Ga^T y = q}`` whenever ``A(z)`` is nonempty, and ``A(z)`` is
empty exactly when some extreme ray ``r`` of ``{r >= 0 : Ga^T r = 0}`` has
``r.(h0 + H z) < 0``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DualInfeasible, EnumerationOverflow
from .geometry import HPolytope, lp_solve
from .geometry.enumeration import is_bounded
from .model import Detector, Gains, Mode, PlantModel

DUAL_VERTEX_CAP = 256
_ZERO_ROW = 1e-12


@dataclass(frozen=True)
class ParamPolytope:
    """``A(z) = {a : Ga a <= h0 + H z}``."""

    Ga: np.ndarray
    h0: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        Ga = np.asarray(self.Ga, dtype=float)
        h0 = np.asarray(self.h0, dtype=float).ravel()
        H = np.asarray(self.H, dtype=float)
        m = h0.size
        Ga = Ga.reshape(m, -1) if Ga.size else np.zeros((m, Ga.shape[-1] if Ga.ndim == 2 else 0))
        H = H.reshape(m, -1) if H.size else np.zeros((m, H.shape[-1] if H.ndim == 2 else 0))
        if Ga.shape[0] != m or H.shape[0] != m:
            raise DimensionMismatch("Ga, h0 and H must have the same number of rows")
        for arr in (Ga, h0, H):
            arr.setflags(write=False)
        object.__setattr__(self, "Ga", Ga)
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "H", H)

    @property
    def n_a(self) -> int:
        return self.Ga.shape[1]

    @property
    def n_z(self) -> int:
        return self.H.shape[1]

    @property
    def n_rows(self) -> int:
        return self.h0.size

    def rhs(self, z) -> np.ndarray:
        return self.h0 + self.H @ np.asarray(z, dtype=float)

    def eval_at(self, z) -> HPolytope:
        """The attack polytope at ``z``; may be empty."""
        return eval_at(self, z)

    def contains(self, z, a, tol: float = 1e-9) -> bool:
        a = np.asarray(a, dtype=float).ravel()
        return bool(np.all(self.Ga @ a <= self.rhs(z) + tol))

    def is_bounded(self) -> bool:
        if self.n_a == 0:
            return True
        G = self.Ga[np.linalg.norm(self.Ga, axis=1) > _ZERO_ROW]
        return G.shape[0] > 0 and is_bounded(G / np.linalg.norm(G, axis=1)[:, None])

    def to_dict(self) -> dict:
        return {"Ga": self.Ga.tolist(), "h0": self.h0.tolist(), "H": self.H.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ParamPolytope":
        return cls(d["Ga"], d["h0"], d["H"])


def eval_at(A: ParamPolytope, z) -> HPolytope:
    return HPolytope(A.Ga, A.rhs(z), dim=A.n_a)


def _drop_zero_rows(Ga, h0, H):
    """Rows that do not involve the attack vector do not restrict the
    attacker's choice and are discarded."""
    keep = np.linalg.norm(Ga, axis=1) > _ZERO_ROW if Ga.shape[1] else np.zeros(Ga.shape[0], bool)
    return Ga[keep], h0[keep], H[keep]


def build_input_set(Gamma_u, U: HPolytope, K, n_x: int) -> ParamPolytope:
    """Attacks ``a_u`` keeping ``u + Gamma_u a_u`` in ``U`` where ``u = -K(x - e)``."""
    Gamma_u = np.asarray(Gamma_u, dtype=float)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    Ga = U.G @ Gamma_u
    H = U.G @ K @ np.hstack([np.eye(n_x), -np.eye(n_x)])
    return ParamPolytope(*_drop_zero_rows(Ga, U.g.copy(), H))


def build_output_set(Gamma_y, Y: HPolytope, W: HPolytope, Cp) -> ParamPolytope:
    """Attacks ``a_y`` keeping ``Cp x + w + Gamma_y a_y`` in ``Y`` for every ``w`` in ``W``."""
    Gamma_y = np.asarray(Gamma_y, dtype=float)
    Cp = np.atleast_2d(np.asarray(Cp, dtype=float))
    n_x = Cp.shape[1]
    Ga = Y.G @ Gamma_y
    h0 = Y.g - W.support_many(Y.G)
    H = -Y.G @ Cp @ np.hstack([np.eye(n_x), np.zeros((n_x, n_x))])
    return ParamPolytope(*_drop_zero_rows(Ga, h0, H))


def build_residual_set(Gamma_y, R: HPolytope, W: HPolytope, C) -> ParamPolytope:
    """Attacks ``a_y`` keeping the residual ``C z + Gamma_y a_y + w`` in ``R``
    for every ``w`` in ``W``."""
    Gamma_y = np.asarray(Gamma_y, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    Ga = R.G @ Gamma_y
    h0 = R.g - W.support_many(R.G)
    H = -R.G @ C
    return ParamPolytope(*_drop_zero_rows(Ga, h0, H))


def bound_rows(lo, hi, n_z: int) -> ParamPolytope:
    """Magnitude bounds ``lo <= a <= hi`` as z-independent rows (infinite
    entries are skipped)."""
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    n = lo.size
    I = np.eye(n)
    Ga = np.vstack([I, -I])
    h0 = np.r_[hi, -lo]
    keep = np.isfinite(h0)
    return ParamPolytope(Ga[keep], h0[keep], np.zeros((int(keep.sum()), n_z)))


def intersect_param(P: ParamPolytope, Q: ParamPolytope) -> ParamPolytope:
    if P.n_a != Q.n_a or P.n_z != Q.n_z:
        raise DimensionMismatch("parametric polytopes differ in dimension")
    return ParamPolytope(np.vstack([P.Ga, Q.Ga]), np.r_[P.h0, Q.h0], np.vstack([P.H, Q.H]))


def product_set(Au: ParamPolytope, Ay: ParamPolytope, Ar: ParamPolytope | None = None
                ) -> ParamPolytope:
    """``Au x (Ay n Ar)`` over ``a = (a_u, a_y)``."""
    if Ar is not None:
        Ay = intersect_param(Ay, Ar)
    nu, ny = Au.n_a, Ay.n_a
    if Au.n_z != Ay.n_z:
        raise DimensionMismatch("parametric polytopes differ in z-dimension")
    Ga = np.block([[Au.Ga, np.zeros((Au.n_rows, ny))],
                   [np.zeros((Ay.n_rows, nu)), Ay.Ga]])
    return ParamPolytope(Ga.reshape(Au.n_rows + Ay.n_rows, nu + ny),
                         np.r_[Au.h0, Ay.h0], np.vstack([Au.H, Ay.H]).reshape(-1, Au.n_z))


@dataclass(frozen=True)
class AttackBounds:
    """Per-channel magnitude limits (1-based channel -> (lo, hi))."""

    inputs: dict
    outputs: dict

    @classmethod
    def none(cls) -> "AttackBounds":
        return cls({}, {})

    def arrays(self, mode: Mode):
        ins = sorted(mode.selection.attacked_inputs)
        outs = sorted(mode.selection.attacked_outputs)
        lo_u = [self.inputs.get(i, (-np.inf, np.inf))[0] for i in ins]
        hi_u = [self.inputs.get(i, (-np.inf, np.inf))[1] for i in ins]
        lo_y = [self.outputs.get(i, (-np.inf, np.inf))[0] for i in outs]
        hi_y = [self.outputs.get(i, (-np.inf, np.inf))[1] for i in outs]
        return (np.array(lo_u, float), np.array(hi_u, float),
                np.array(lo_y, float), np.array(hi_y, float))


def build_stealth_set(mode: Mode, plant: PlantModel, gains: Gains, detector: Detector,
                      bounds: AttackBounds | None = None) -> ParamPolytope:
    """The stealthy attack set of ``mode`` including magnitude bounds."""
    n_x, n_z = plant.n_x, 2 * plant.n_x
    bounds = AttackBounds.none() if bounds is None else bounds
    lo_u, hi_u, lo_y, hi_y = bounds.arrays(mode)
    Au = build_input_set(mode.Gamma_u, plant.U, gains.K, n_x)
    Au = intersect_param(Au, bound_rows(lo_u, hi_u, n_z))
    Ay = build_output_set(mode.Gamma_y, plant.Y, plant.W, plant.Cp)
    Ar = build_residual_set(mode.Gamma_y, detector.R, plant.W, mode.C)
    Ay = intersect_param(intersect_param(Ay, Ar), bound_rows(lo_y, hi_y, n_z))
    return product_set(Au, Ay)


@dataclass(frozen=True)
class RobustifiedRow:
    """Finite description of ``z -> max_{a in A(z)} q.a``.

    ``value(z) = min_k (C[k].z + d[k])`` where ``A(z)`` is nonempty;
    ``A(z)`` is empty iff ``ray_H[j].z + ray_h[j] < 0`` for some ``j``.
    """

    C: np.ndarray
    d: np.ndarray
    ray_H: np.ndarray
    ray_h: np.ndarray

    @property
    def n_forms(self) -> int:
        return self.d.size

    def value(self, z) -> float:
        z = np.asarray(z, dtype=float)
        if self.is_empty_at(z):
            return -np.inf
        return float(np.min(self.C @ z + self.d))

    def is_empty_at(self, z, tol: float = 1e-9) -> bool:
        if self.ray_h.size == 0:
            return False
        return bool(np.any(self.ray_H @ np.asarray(z, dtype=float) + self.ray_h < -tol))


def _scale(G):
    return max(1.0, float(np.abs(G).max(initial=0.0)))


def dual_vertices(Ga, q, tol: float = 1e-9, cap: int = DUAL_VERTEX_CAP) -> np.ndarray:
    """Vertices of ``{y >= 0 : Ga^T y = q}`` by basis enumeration."""
    Ga = np.asarray(Ga, dtype=float)
    q = np.asarray(q, dtype=float).ravel()
    m, n = Ga.shape
    if n == 0 or m == 0:
        if np.any(np.abs(q) > tol):
            return np.zeros((0, m))
        return np.zeros((1, m))
    r = np.linalg.matrix_rank(Ga)
    out = []
    qs = tol * max(1.0, np.abs(q).max())
    for S in itertools.combinations(range(m), r):
        M = Ga[list(S)].T
        if np.linalg.matrix_rank(M) < r:
            continue
        yS, *_ = np.linalg.lstsq(M, q, rcond=None)
        if np.abs(M @ yS - q).max() > qs * 10 or yS.min() < -tol:
            continue
        y = np.zeros(m)
        y[list(S)] = np.maximum(yS, 0.0)
        if not any(np.abs(y - w).max() <= 1e-9 * _scale(w) for w in out):
            out.append(y)
            if len(out) > cap:
                raise EnumerationOverflow(f"more than {cap} dual vertices")
    return np.array(out).reshape(-1, m)


def extreme_rays(Ga, tol: float = 1e-9) -> np.ndarray:
    """Extreme rays of the cone ``{r >= 0 : Ga^T r = 0}`` (unit 1-norm)."""
    Ga = np.asarray(Ga, dtype=float)
    m, n = Ga.shape
    rays = []
    if n == 0:
        return np.eye(m)
    for k in range(1, min(m, n + 1) + 1):
        if math.comb(m, k) > 200_000:
            raise EnumerationOverflow("too many candidate ray supports")
        for S in itertools.combinations(range(m), k):
            M = Ga[list(S)].T
            _, s, vt = np.linalg.svd(M, full_matrices=True)
            rank = int(np.sum(s > tol * _scale(M)))
            if k - rank != 1:
                continue
            v = vt[-1]
            if np.all(v > tol):
                pass
            elif np.all(v < -tol):
                v = -v
            else:
                continue
            ray = np.zeros(m)
            ray[list(S)] = v / v.sum()
            if not any(np.abs(ray - w).max() <= 1e-9 for w in rays):
                rays.append(ray)
    return np.array(rays).reshape(-1, m)


def robustify(q, A: ParamPolytope, cap: int = DUAL_VERTEX_CAP, tol: float = 1e-9
              ) -> RobustifiedRow:
    """Affine pieces of ``z -> max_{a in A(z)} q.a`` plus the emptiness rays."""
    q = np.asarray(q, dtype=float).ravel()
    if q.size != A.n_a:
        raise DimensionMismatch("direction does not match the attack dimension")
    Y = dual_vertices(A.Ga, q, tol, cap)
    if Y.shape[0] == 0:
        raise DualInfeasible("the maximum over the attack set is unbounded")
    C = Y @ A.H
    d = Y @ A.h0
    # keep the tightest offset among forms sharing a linear part
    key = np.round(C, 10)
    order = np.lexsort(np.c_[d, key].T[::-1])
    C, d, key = C[order], d[order], key[order]
    first = np.ones(d.size, dtype=bool)
    first[1:] = np.any(key[1:] != key[:-1], axis=1)
    R = extreme_rays(A.Ga, tol)
    return RobustifiedRow(C[first], d[first], R @ A.H, R @ A.h0)


def pointwise_max(A: ParamPolytope, q, z):
    """Reference value of ``max_{a in A(z)} q.a`` by a direct LP (``-inf``
    when ``A(z)`` is empty)."""
    P = eval_at(A, z)
    if P.n_rows == 0 and A.n_a == 0:
        return 0.0
    res = lp_solve(q, A.Ga, A.rhs(z), "max")
    if res.status == "infeasible":
        return -np.inf
    if res.status == "unbounded":
        return np.inf
    return res.value
