"""Closed-loop plant/observer/detector model and its augmented switching modes.

The augmented state is ``z = (x, e)`` with ``e = x - xhat`` the estimation
error, the attack vector is ``a = (a_u, a_y)`` and the disturbance vector is
``eta = (v, w)``.  Every attack action ``sigma`` yields a mode

    z+ = A z + B_sigma a + E eta,      r = C z + D_sigma a + F eta.

All sets are expressed in deviation coordinates around the operating point.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionMismatch, EmptyConstraintSet, IndexOutOfRange,
                     NotCSet, Uncontrollable)
from .geometry import DEFAULT_TOL, HPolytope, Tolerances, cartesian_product, erode

NOMINAL = "N"


def _mat(M, rows=None, cols=None, name="matrix"):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if rows is not None and M.shape[0] != rows:
        raise DimensionMismatch(f"{name} has {M.shape[0]} rows, expected {rows}")
    if cols is not None and M.shape[1] != cols:
        raise DimensionMismatch(f"{name} has {M.shape[1]} columns, expected {cols}")
    return M


def spectral_radius(M) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if np.size(M) else 0.0


def controllability_matrix(A, B):
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


@dataclass(frozen=True)
class PlantModel:
    """Discrete-time plant ``x+ = Ap x + Bp u + v``, ``y = Cp x + w`` with
    state, input, output and disturbance sets (all C-sets)."""

    Ap: np.ndarray
    Bp: np.ndarray
    Cp: np.ndarray
    X: HPolytope
    U: HPolytope
    Y: HPolytope
    V: HPolytope
    W: HPolytope

    def __post_init__(self):
        Ap = _mat(self.Ap, name="Ap")
        n = Ap.shape[0]
        _mat(Ap, n, n, "Ap")
        Bp = _mat(self.Bp, n, name="Bp")
        Cp = _mat(self.Cp, cols=n, name="Cp")
        object.__setattr__(self, "Ap", Ap)
        object.__setattr__(self, "Bp", Bp)
        object.__setattr__(self, "Cp", Cp)
        for name, S, dim in (("X", self.X, n), ("U", self.U, Bp.shape[1]),
                             ("Y", self.Y, Cp.shape[0]), ("V", self.V, n),
                             ("W", self.W, Cp.shape[0])):
            if S.dim != dim:
                raise DimensionMismatch(f"set {name} has dimension {S.dim}, expected {dim}")
            if not S.is_cset():
                raise NotCSet(f"set {name} is not a C-set")
        if np.linalg.matrix_rank(controllability_matrix(Ap, Bp)) < n:
            warnings.warn("(Ap, Bp) is not controllable", stacklevel=2)
        if np.linalg.matrix_rank(controllability_matrix(Ap.T, Cp.T)) < n:
            warnings.warn("(Ap, Cp) is not observable", stacklevel=2)

    @property
    def n_x(self) -> int:
        return self.Ap.shape[0]

    @property
    def n_u(self) -> int:
        return self.Bp.shape[1]

    @property
    def n_y(self) -> int:
        return self.Cp.shape[0]


@dataclass(frozen=True)
class Gains:
    """State-feedback gain ``K`` (``u = -K xhat``) and observer gain ``L``."""

    K: np.ndarray
    L: np.ndarray

    def check(self, plant: PlantModel) -> None:
        K = _mat(self.K, plant.n_u, plant.n_x, "K")
        L = _mat(self.L, plant.n_x, plant.n_y, "L")
        if spectral_radius(plant.Ap - plant.Bp @ K) >= 1:
            raise ValueError("Ap - Bp K is not Schur stable")
        if spectral_radius(plant.Ap - L @ plant.Cp) >= 1:
            raise ValueError("Ap - L Cp is not Schur stable")

    @classmethod
    def for_plant(cls, plant: PlantModel, K, L) -> "Gains":
        g = cls(_mat(K, plant.n_u, plant.n_x, "K"), _mat(L, plant.n_x, plant.n_y, "L"))
        g.check(plant)
        return g


@dataclass(frozen=True)
class ChannelSelection:
    """1-based indices of the input and output channels under attack."""

    attacked_inputs: frozenset = field(default_factory=frozenset)
    attacked_outputs: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "attacked_inputs", frozenset(int(i) for i in self.attacked_inputs))
        object.__setattr__(self, "attacked_outputs", frozenset(int(i) for i in self.attacked_outputs))

    @property
    def is_nominal(self) -> bool:
        return not self.attacked_inputs and not self.attacked_outputs

    def __or__(self, other: "ChannelSelection") -> "ChannelSelection":
        return ChannelSelection(self.attacked_inputs | other.attacked_inputs,
                                self.attacked_outputs | other.attacked_outputs)

    def check(self, n_u: int, n_y: int) -> None:
        for idx, total, kind in ((self.attacked_inputs, n_u, "input"),
                                 (self.attacked_outputs, n_y, "output")):
            bad = [i for i in idx if not 1 <= i <= total]
            if bad:
                raise IndexOutOfRange(f"{kind} channel(s) {sorted(bad)} outside 1..{total}")


def build_gamma(selection, total: int) -> np.ndarray:
    """Selection matrix mapping attack coordinates onto channels.

    Channel indices are 1-based; columns follow ascending channel index.
    """
    sel = sorted(int(i) for i in selection)
    if len(set(sel)) != len(sel):
        raise ValueError("duplicate channel index")
    for i in sel:
        if not 1 <= i <= total:
            raise IndexOutOfRange(f"channel {i} outside 1..{total}")
    G = np.zeros((total, len(sel)))
    for col, i in enumerate(sel):
        G[i - 1, col] = 1.0
    return G


@dataclass(frozen=True)
class Mode:
    """Matrices of one attack action on the augmented state."""

    label: str
    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    C: np.ndarray
    D: np.ndarray
    F: np.ndarray
    Gamma_u: np.ndarray
    Gamma_y: np.ndarray
    selection: ChannelSelection

    @property
    def n_z(self) -> int:
        return self.A.shape[0]

    @property
    def n_a(self) -> int:
        return self.B.shape[1]

    @property
    def n_au(self) -> int:
        return self.Gamma_u.shape[1]

    @property
    def n_ay(self) -> int:
        return self.Gamma_y.shape[1]

    @property
    def is_nominal(self) -> bool:
        return self.n_a == 0

    @property
    def attack_in_residual(self) -> bool:
        """Whether the attack enters the residual directly (output attacks)."""
        return bool(np.abs(self.D).max(initial=0.0) > 0.0)

    def step(self, z, a, eta) -> np.ndarray:
        return self.A @ z + self.B @ a + self.E @ eta

    def residual(self, z, a, eta) -> np.ndarray:
        return self.C @ z + self.D @ a + self.F @ eta


def build_mode(plant: PlantModel, gains: Gains, sel: ChannelSelection, label=NOMINAL,
               input_attack_in_error: bool = False) -> Mode:
    """Assemble the augmented matrices of one attack action.

    With ``input_attack_in_error`` the actuator attack also drives the
    estimation error (the estimator then uses the uncorrupted command while
    the plant receives the corrupted one); by default it acts on ``x`` only.
    """
    gains.check(plant)
    sel.check(plant.n_u, plant.n_y)
    Ap, Bp, Cp = plant.Ap, plant.Bp, plant.Cp
    K, L = _mat(gains.K), _mat(gains.L)
    n, ny = plant.n_x, plant.n_y
    Gu = build_gamma(sel.attacked_inputs, plant.n_u)
    Gy = build_gamma(sel.attacked_outputs, ny)
    nau, nay = Gu.shape[1], Gy.shape[1]
    A = np.block([[Ap - Bp @ K, Bp @ K], [np.zeros((n, n)), Ap - L @ Cp]])
    Bu_e = Bp @ Gu if input_attack_in_error else np.zeros((n, nau))
    B = np.block([[Bp @ Gu, np.zeros((n, nay))], [Bu_e, -L @ Gy]])
    E = np.block([[np.eye(n), np.zeros((n, ny))], [np.eye(n), -L]])
    C = np.hstack([np.zeros((ny, n)), Cp])
    D = np.hstack([np.zeros((ny, nau)), Gy])
    F = np.hstack([np.zeros((ny, n)), np.eye(ny)])
    return Mode(str(label), A, B.reshape(2 * n, nau + nay), E, C,
                D.reshape(ny, nau + nay), F, Gu, Gy, sel)


def ackermann_place(A, b, poles) -> np.ndarray:
    """Row gain ``K`` with ``eig(A - b K) = poles`` for a single-input pair."""
    A = _mat(A, name="A")
    n = A.shape[0]
    b = np.asarray(b, dtype=float).reshape(n, -1)
    if b.shape[1] != 1:
        raise DimensionMismatch("Ackermann's formula needs a single input")
    poles = np.asarray(poles)
    if poles.size != n:
        raise DimensionMismatch(f"{poles.size} poles given for a state of size {n}")
    Wc = controllability_matrix(A, b)
    if np.linalg.matrix_rank(Wc) < n or np.linalg.cond(Wc) > 1e12:
        raise Uncontrollable("pair is not controllable")
    coeffs = np.real(np.poly(poles))
    phi = np.zeros_like(A)
    for c in coeffs:
        phi = phi @ A + c * np.eye(n)
    en = np.zeros(n)
    en[-1] = 1.0
    return (en @ np.linalg.solve(Wc, phi))[None, :]


def observer_gain(A, C, poles) -> np.ndarray:
    """Observer gain ``L`` with ``eig(A - L C) = poles`` (by duality)."""
    return ackermann_place(np.asarray(A).T, np.asarray(C).T, poles).T


@dataclass(frozen=True)
class Detector:
    """Stateless detector: alarm whenever the residual leaves ``R``."""

    R: HPolytope

    def __post_init__(self):
        if not self.R.is_cset():
            raise NotCSet("detector set R is not a C-set")

    def alarm(self, r, tol: Tolerances = DEFAULT_TOL) -> bool:
        return residual_alarm(self, r, tol)


def residual_alarm(detector: Detector, r, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True when ``r`` lies outside the closed detector set."""
    return not detector.R.contains_point(np.atleast_1d(r), tol)


@dataclass(frozen=True)
class AugmentedConstraints:
    Z: HPolytope
    H: HPolytope
    e_max: float


def build_augmented_constraints(plant: PlantModel, gains: Gains, e_max: float = 0.5,
                                tol: Tolerances = DEFAULT_TOL) -> AugmentedConstraints:
    """Constraint set on ``z`` and disturbance set ``H = V x W``.

    ``Z`` collects the state constraint on ``x``, the input constraint on
    ``u = -K (x - e)``, the output constraint tightened by the measurement
    noise, and the box ``|e|_inf <= e_max``.
    """
    if e_max <= 0:
        raise ValueError("e_max must be positive")
    n = plant.n_x
    K = _mat(gains.K, plant.n_u, n, "K")
    Ix0 = np.hstack([np.eye(n), np.zeros((n, n))])
    u_map = -K @ np.hstack([np.eye(n), -np.eye(n)])
    Yr = erode(plant.Y, plant.W)
    if Yr.is_empty(tol):
        raise EmptyConstraintSet("output set is empty after noise tightening")
    E_box = HPolytope.ball_inf(e_max, n)
    G = np.vstack([plant.X.G @ Ix0, plant.U.G @ u_map, Yr.G @ plant.Cp @ Ix0,
                   np.hstack([np.zeros((2 * n, n)), E_box.G])])
    g = np.r_[plant.X.g, plant.U.g, Yr.g, E_box.g]
    Z = HPolytope(G, g, dim=2 * n)
    if not Z.is_cset(tol):
        raise EmptyConstraintSet("augmented constraint set Z is not a C-set")
    H = cartesian_product(plant.V, plant.W)
    return AugmentedConstraints(Z, H, float(e_max))
