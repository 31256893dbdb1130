"""Scenario files: validation and assembly of the switched system.

A scenario is a JSON object with the blocks ``plant``, ``operating_point``,
``gains``, ``detector``, ``e_max``, ``channels`` and optional
``tolerances``, ``seed``, ``lmax``, ``mode``, ``sweep`` and ``name``.  Sets
are given in absolute coordinates either as boxes ``{"lb": [...], "ub":
[...]}``, as infinity-norm balls ``{"inf_norm": r}`` (disturbances only) or
as ``{"G": ..., "g": ...}``; they are shifted to deviation coordinates
around the operating point here.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .attack_graph import AttackGraph, ModeTable, build_dwell_graph, compose_modes
from .errors import CPSImpactError, ScenarioError
from .geometry import HPolytope, Tolerances
from .model import (NOMINAL, ChannelSelection, Detector, Gains, PlantModel,
                    ackermann_place, build_augmented_constraints, build_mode,
                    observer_gain)
from .reach import SwitchedSystem
from .stealth import AttackBounds, build_stealth_set

FIXTURES = ("twotank_sensor1", "twotank_sensor2", "twotank_actuator", "twotank_combined")


def _is_matrix(v) -> bool:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        return False
    return a.ndim == 2 and a.size > 0 and np.all(np.isfinite(a))


def _is_vector(v) -> bool:
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        return False
    return a.ndim == 1 and np.all(np.isfinite(a))


def _check_set(d, path, errs, allow_norm=False):
    if not isinstance(d, dict):
        errs.append((path, "expected an object describing a set"))
        return
    if "lb" in d or "ub" in d:
        if not (_is_vector(d.get("lb")) and _is_vector(d.get("ub"))):
            errs.append((path, "box needs numeric 'lb' and 'ub' vectors"))
        elif len(d["lb"]) != len(d["ub"]):
            errs.append((path, "'lb' and 'ub' differ in length"))
    elif "G" in d:
        if not _is_matrix(d["G"]) or not _is_vector(d.get("g")):
            errs.append((path, "H-representation needs matrix 'G' and vector 'g'"))
        elif len(d["G"]) != len(d["g"]):
            errs.append((path, "'G' and 'g' differ in length"))
    elif allow_norm and "inf_norm" in d:
        r = d["inf_norm"]
        if not isinstance(r, (int, float)) or r <= 0:
            errs.append((f"{path}.inf_norm", "must be a positive number"))
    else:
        errs.append((path, "unrecognised set description"))


def validate_scenario(sc: dict) -> list:
    """Schema check; returns a list of ``(json_path, message)``."""
    errs = []
    if not isinstance(sc, dict):
        return [("", "scenario must be a JSON object")]
    plant = sc.get("plant")
    if plant is None:
        errs.append(("plant", "missing required block"))
    elif not isinstance(plant, dict):
        errs.append(("plant", "must be an object"))
    else:
        for key in ("A", "B", "C"):
            if key not in plant:
                errs.append((f"plant.{key}", "missing"))
            elif not _is_matrix(plant[key]):
                errs.append((f"plant.{key}", "must be a nonempty numeric matrix"))
        if not errs:
            A, B, C = (np.asarray(plant[k], float) for k in "ABC")
            n = A.shape[0]
            if A.shape != (n, n):
                errs.append(("plant.A", "must be square"))
            if B.shape[0] != n:
                errs.append(("plant.B", f"must have {n} rows"))
            if C.shape[1] != n:
                errs.append(("plant.C", f"must have {n} columns"))
        for key in ("X", "U"):
            if key not in plant:
                errs.append((f"plant.{key}", "missing"))
            else:
                _check_set(plant[key], f"plant.{key}", errs)
        if "Y" in plant:
            _check_set(plant["Y"], "plant.Y", errs)
        for key in ("V", "W"):
            if key not in plant:
                errs.append((f"plant.{key}", "missing"))
            else:
                _check_set(plant[key], f"plant.{key}", errs, allow_norm=True)
    op = sc.get("operating_point", {})
    if not isinstance(op, dict):
        errs.append(("operating_point", "must be an object"))
    else:
        for key in ("x", "u"):
            if key in op and not _is_vector(op[key]):
                errs.append((f"operating_point.{key}", "must be a numeric vector"))
    gains = sc.get("gains")
    if gains is None:
        errs.append(("gains", "missing required block"))
    elif not isinstance(gains, dict):
        errs.append(("gains", "must be an object"))
    elif "poles" in gains:
        poles = gains["poles"]
        for key in ("controller", "observer"):
            if not isinstance(poles, dict) or not _is_vector(poles.get(key)):
                errs.append((f"gains.poles.{key}", "must be a numeric vector"))
    else:
        for key in ("K", "L"):
            if not _is_matrix(gains.get(key)):
                errs.append((f"gains.{key}", "must be a numeric matrix"))
    det = sc.get("detector")
    if det is None:
        errs.append(("detector", "missing required block"))
    elif not isinstance(det, dict) or "R" not in det:
        errs.append(("detector.R", "missing"))
    else:
        _check_set(det["R"], "detector.R", errs, allow_norm=True)
    e_max = sc.get("e_max", 0.5)
    if not isinstance(e_max, (int, float)) or e_max <= 0:
        errs.append(("e_max", "must be a positive number"))
    chans = sc.get("channels", [])
    if not isinstance(chans, list):
        errs.append(("channels", "must be a list"))
        chans = []
    for k, ch in enumerate(chans):
        p = f"channels[{k}]"
        if not isinstance(ch, dict):
            errs.append((p, "must be an object"))
            continue
        for key in ("inputs", "outputs"):
            v = ch.get(key, [])
            if not isinstance(v, list) or not all(isinstance(i, int) and not isinstance(i, bool) for i in v):
                errs.append((f"{p}.{key}", "must be a list of 1-based integer indices"))
        if not ch.get("inputs") and not ch.get("outputs"):
            errs.append((p, "channel attacks neither inputs nor outputs"))
        b = ch.get("bounds")
        if b is not None and not (_is_vector(b) and len(b) == 2 and b[0] <= b[1]):
            errs.append((f"{p}.bounds", "must be [lo, hi] with lo <= hi"))
        if "dwell" in ch:
            dw = ch["dwell"]
            if not isinstance(dw, dict) or not isinstance(dw.get("n_max"), int):
                errs.append((f"{p}.dwell.n_max", "must be an integer"))
            elif dw["n_max"] < 0:
                errs.append((f"{p}.dwell.n_max", "must be nonnegative"))
            if isinstance(dw, dict) and "n_min" in dw and (not isinstance(dw["n_min"], int) or dw["n_min"] < 1):
                errs.append((f"{p}.dwell.n_min", "must be a positive integer"))
            if isinstance(dw, dict) and "n_min_offset" in dw and not isinstance(dw["n_min_offset"], int):
                errs.append((f"{p}.dwell.n_min_offset", "must be an integer"))
        elif "graph" in ch:
            g = ch["graph"]
            if not isinstance(g, dict) or "nodes" not in g or "edges" not in g:
                errs.append((f"{p}.graph", "needs 'nodes' and 'edges'"))
        else:
            errs.append((p, "needs either 'dwell' or 'graph'"))
    if "tolerances" in sc:
        try:
            Tolerances.from_dict(sc["tolerances"])
        except (TypeError, ValueError) as exc:
            errs.append(("tolerances", str(exc)))
    if "mode" in sc and sc["mode"] not in ("exact", "convex-inner"):
        errs.append(("mode", "must be 'exact' or 'convex-inner'"))
    if "lmax" in sc and (not isinstance(sc["lmax"], int) or sc["lmax"] < 1):
        errs.append(("lmax", "must be a positive integer"))
    if "sweep" in sc:
        sw = sc["sweep"]
        if not isinstance(sw, dict) or not isinstance(sw.get("n_max"), list) or \
                not all(isinstance(v, int) and v >= 0 for v in sw["n_max"]):
            errs.append(("sweep.n_max", "must be a list of nonnegative integers"))
    if not errs:
        errs.extend(_check_indices(sc))
    return errs


def _check_indices(sc):
    errs = []
    B = np.asarray(sc["plant"]["B"], float)
    C = np.asarray(sc["plant"]["C"], float)
    n_u, n_y = B.shape[1], C.shape[0]
    used_u, used_y = set(), set()
    for k, ch in enumerate(sc.get("channels", [])):
        for key, total, used in (("inputs", n_u, used_u), ("outputs", n_y, used_y)):
            for i in ch.get(key, []):
                if not 1 <= i <= total:
                    errs.append((f"channels[{k}].{key}", f"index {i} outside 1..{total}"))
                if i in used:
                    errs.append((f"channels[{k}].{key}", f"channel {i} already used"))
                used.add(i)
    return errs


# ----------------------------------------------------------------------
# assembly
# ----------------------------------------------------------------------

def _set(d, shift, dim=None) -> HPolytope:
    shift = np.asarray(shift, dtype=float)
    if "inf_norm" in d:
        return HPolytope.ball_inf(float(d["inf_norm"]), dim)
    if "lb" in d:
        return HPolytope.box(np.asarray(d["lb"], float) - shift, np.asarray(d["ub"], float) - shift)
    G = np.asarray(d["G"], float)
    return HPolytope(G, np.asarray(d["g"], float) - G @ shift)


def dwell_params(ch: dict, n_max: int | None = None):
    dw = ch["dwell"]
    n_max = int(dw["n_max"]) if n_max is None else int(n_max)
    if "n_min_offset" in dw:
        n_min = max(1, n_max + int(dw["n_min_offset"]))
    else:
        n_min = int(dw.get("n_min", 1))
    return n_max, n_min


@dataclass
class Scenario:
    """Validated scenario with the assembled switched system."""

    name: str
    raw: dict
    plant: PlantModel
    gains: Gains
    detector: Detector
    system: SwitchedSystem
    selections: dict
    bounds: AttackBounds
    tol: Tolerances
    seed: int
    lmax: int
    method: str

    def with_n_max(self, n_max: int) -> "Scenario":
        """Same scenario with every dwell channel's ``n_max`` replaced."""
        raw = copy.deepcopy(self.raw)
        for ch in raw.get("channels", []):
            if "dwell" in ch:
                n, m = dwell_params(ch, n_max)
                ch["dwell"] = {"n_max": n, "n_min": m}
        return build_scenario(raw)

    def nominal(self) -> "Scenario":
        """The attack-free counterpart (no channels)."""
        raw = copy.deepcopy(self.raw)
        raw["channels"] = []
        return build_scenario(raw)


def build_scenario(sc: dict) -> Scenario:
    errs = validate_scenario(sc)
    if errs:
        raise ScenarioError(errs)
    p = sc["plant"]
    Ap = np.asarray(p["A"], float)
    Bp = np.asarray(p["B"], float)
    Cp = np.asarray(p["C"], float)
    n_x, n_u, n_y = Ap.shape[0], Bp.shape[1], Cp.shape[0]
    op = sc.get("operating_point", {})
    xs = np.asarray(op.get("x", np.zeros(n_x)), float)
    us = np.asarray(op.get("u", np.zeros(n_u)), float)
    if xs.size != n_x or us.size != n_u:
        raise ScenarioError([("operating_point", "dimension does not match the plant")])
    ys = Cp @ xs
    X = _set(p["X"], xs)
    U = _set(p["U"], us)
    Y = _set(p["Y"], ys) if "Y" in p else _output_set_from_X(p["X"], Cp, xs)
    V = _set(p["V"], np.zeros(n_x), n_x)
    W = _set(p["W"], np.zeros(n_y), n_y)
    errs = []
    for name, S, dim in (("X", X, n_x), ("U", U, n_u), ("Y", Y, n_y), ("V", V, n_x), ("W", W, n_y)):
        if S.dim != dim:
            errs.append((f"plant.{name}", f"dimension {S.dim}, expected {dim}"))
        elif not S.is_cset():
            errs.append((f"plant.{name}", "does not contain the operating point in its interior"))
    if errs:
        raise ScenarioError(errs)
    plant = PlantModel(Ap, Bp, Cp, X, U, Y, V, W)
    g = sc["gains"]
    try:
        if "poles" in g:
            K = ackermann_place(Ap, Bp, g["poles"]["controller"])
            L = observer_gain(Ap, Cp, g["poles"]["observer"])
        else:
            K, L = g["K"], g["L"]
        gains = Gains.for_plant(plant, K, L)
    except (CPSImpactError, ValueError) as exc:
        raise ScenarioError([("gains", str(exc))]) from exc
    R = _set(sc["detector"]["R"], np.zeros(n_y), n_y)
    if R.dim != n_y:
        raise ScenarioError([("detector.R", f"dimension {R.dim}, expected {n_y}")])
    detector = Detector(R)
    tol = Tolerances.from_dict(sc.get("tolerances", {}))
    try:
        cons = build_augmented_constraints(plant, gains, float(sc.get("e_max", 0.5)), tol)
    except CPSImpactError as exc:
        raise ScenarioError([("plant", str(exc))]) from exc

    chans = sc.get("channels", [])
    alphabets, graphs = [], []
    in_b, out_b = {}, {}
    for k, ch in enumerate(chans):
        sel = ChannelSelection(ch.get("inputs", []), ch.get("outputs", []))
        label = ch.get("label", f"A{k + 1}" if len(chans) > 1 else "A")
        alphabets.append({NOMINAL: ChannelSelection(), label: sel})
        if "dwell" in ch:
            n_max, n_min = dwell_params(ch)
            graphs.append(build_dwell_graph(n_max, n_min, attack_label=label))
        else:
            try:
                graphs.append(AttackGraph.from_dict(ch["graph"]))
            except CPSImpactError as exc:
                raise ScenarioError([(f"channels[{k}].graph", str(exc))]) from exc
        if "bounds" in ch:
            lo, hi = ch["bounds"]
            for i in ch.get("inputs", []):
                in_b[i] = (lo, hi)
            for i in ch.get("outputs", []):
                out_b[i] = (lo, hi)
    if graphs:
        graph, selections = compose_modes(ModeTable(tuple(alphabets)), graphs)
    else:
        graph = build_dwell_graph(0)
        selections = {NOMINAL: ChannelSelection()}
    bounds = AttackBounds(in_b, out_b)
    modes, stealth = {}, {}
    for sid, sel in selections.items():
        mode = build_mode(plant, gains, sel, sid)
        modes[sid] = mode
        stealth[sid] = build_stealth_set(mode, plant, gains, detector, bounds)
    meta = {"e_max": cons.e_max, "operating_point": {"x": xs.tolist(), "u": us.tolist()},
            "detector": detector}
    system = SwitchedSystem(modes, graph, cons.Z, cons.H, stealth, tol, meta)
    return Scenario(sc.get("name", "scenario"), copy.deepcopy(sc), plant, gains, detector,
                    system, selections, bounds, tol, int(sc.get("seed", tol.rng_seed)),
                    int(sc.get("lmax", 200)), sc.get("mode", "exact"))


def _output_set_from_X(Xd, Cp, xs) -> HPolytope:
    """Default output set: the range of ``Cp x`` over ``X`` for selector rows."""
    if "lb" not in Xd:
        raise ScenarioError([("plant.Y", "required when X is not a box")])
    lb, ub = np.asarray(Xd["lb"], float), np.asarray(Xd["ub"], float)
    Cp = np.asarray(Cp, float)
    lo = np.minimum(Cp * lb, Cp * ub).sum(axis=1)
    hi = np.maximum(Cp * lb, Cp * ub).sum(axis=1)
    return HPolytope.box(lo - Cp @ xs, hi - Cp @ xs)


def load_scenario(path) -> Scenario:
    """Load from a file path or the name of a bundled fixture."""
    return build_scenario(read_scenario(path))


def read_scenario(path) -> dict:
    p = Path(path)
    if not p.exists() and str(path) in FIXTURES:
        text = resources.files("cpsimpact.data").joinpath(f"{path}.json").read_text()
    else:
        try:
            text = p.read_text()
        except OSError as exc:
            raise ScenarioError([("", f"cannot read {path}: {exc}")]) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([("", f"invalid JSON: {exc}")]) from exc
