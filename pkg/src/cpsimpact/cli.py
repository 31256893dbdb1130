"""Command-line frontend: validate, reach, metrics, simulate, export.

Exit codes: 0 on success, 2 when the scenario fails validation, 3 on a
numerical failure.  Output files are byte-identical across reruns with the
same inputs and seed; timestamps and timings go to ``*.meta.json`` sidecars.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import CPSImpactError, ScenarioError
from .geometry import PolyUnion
from .metrics import impact_sweep, sweep_csv
from .reach import ReachResult, backward_sequence
from .scenario import build_scenario, read_scenario, validate_scenario

OUT_ENV = "CPSIMPACT_OUT"
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("cpsimpact")


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV, "cpsimpact_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _write(path: Path, text: str, meta: dict | None = None) -> None:
    path.write_text(text)
    side = dict(meta or {})
    side["written"] = datetime.now(timezone.utc).isoformat()
    path.with_name(path.name + ".meta.json").write_text(_dump(side))
    print(path)


def _load(args):
    raw = read_scenario(args.scenario)
    if args.lmax is not None:
        raw["lmax"] = args.lmax
    if args.mode is not None:
        raw["mode"] = args.mode
    if args.seed is not None:
        raw["seed"] = args.seed
    sc = build_scenario(raw)
    if getattr(args, "n_max", None) is not None:
        sc = sc.with_n_max(args.n_max)
    return sc


def _reach_payload(sc, res: ReachResult) -> dict:
    d = res.to_dict()
    d["scenario"] = sc.name
    d["graph"] = sc.system.graph.to_dict()
    d["e_max"] = sc.system.meta.get("e_max")
    d["Z"] = sc.system.Z.to_dict()
    d["notes"] = [f"estimation error box |e|_inf <= {sc.system.meta.get('e_max')}",
                  "constraints hold vacuously where the attack set is empty"]
    return d


def cmd_validate(args) -> int:
    raw = read_scenario(args.scenario)
    errs = validate_scenario(raw)
    if errs:
        for path, msg in errs:
            print(f"{path}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    build_scenario(raw)
    print("ok")
    return EXIT_OK


def cmd_reach(args) -> int:
    sc = _load(args)
    t0 = time.perf_counter()
    res = backward_sequence(sc.system, sc.lmax, sc.method)
    out = _out_dir(args)
    tag = sc.name if args.n_max is None else f"{sc.name}_n{args.n_max}"
    _write(out / f"{tag}_reach.json", _dump(_reach_payload(sc, res)),
           {"elapsed_s": time.perf_counter() - t0, "scenario": str(args.scenario)})
    print(f"status={res.status} iterations={res.iterations} pieces={len(res.safe_set)}"
          f" equality={res.equality_mode} underapproximation={res.underapproximation}")
    return EXIT_OK


def _n_values(args, sc):
    if args.n_values:
        return [int(x) for x in args.n_values.split(",")]
    return list(sc.raw.get("sweep", {}).get("n_max", range(0, 4)))


def cmd_metrics(args) -> int:
    sc = _load(args)
    ns = _n_values(args, sc)
    out = _out_dir(args)
    t0 = time.perf_counter()
    rows = impact_sweep(sc, ns)
    _write(out / f"{sc.name}_metrics.csv", sweep_csv(rows),
           {"elapsed_s": time.perf_counter() - t0, "n_max": ns})
    if not args.no_slice:
        n_x = sc.plant.n_x
        dims = list(range(n_x, 2 * n_x))
        t0 = time.perf_counter()
        rows_s = impact_sweep(sc, ns, slice_dims=(dims, [0.0] * n_x))
        _write(out / f"{sc.name}_metrics_slice_e0.csv", sweep_csv(rows_s),
               {"elapsed_s": time.perf_counter() - t0, "n_max": ns, "slice": "e=0"})
    for r in rows:
        print(f"n_max={r.n_max} I1={r.I1:.6f} I2={r.I2:.6f} status={r.status}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .reach import sample_union
    from .sim import falsify, grid_oracle, simulate_batch

    sc = _load(args)
    sys_ = sc.system
    data = json.loads(Path(args.safe_set).read_text())
    S = PolyUnion.from_dict(data["safe_set"]) if "safe_set" in data else PolyUnion.from_dict(data)
    rng = np.random.default_rng(sc.seed)
    report = {"scenario": sc.name, "budget": args.budget, "T": args.T, "seed": sc.seed}
    t0 = time.perf_counter()
    if S.pieces and not S.is_empty():
        X = sample_union(S, args.budget, rng)
        nodes = np.array(sys_.graph.nodes, dtype=object)[rng.integers(len(sys_.graph.nodes),
                                                                       size=X.shape[0])]
        b = simulate_batch(sys_, X, nodes, args.T, seed=sc.seed)
        report.update(rollouts=int(X.shape[0]), exits=int(b.exits.sum()),
                      alarms=int(b.alarms.sum()), nominal_alarms=int(b.nominal_alarms.sum()),
                      infeasible_steps=int(b.infeasible_steps.sum()),
                      stealth_error=b.stealth_error)
        f = falsify(sys_, S, args.budget, sc.seed, args.T)
        report.update(falsify_inside=f.inside_trials, falsify_inside_exits=f.inside_exits,
                      falsify_outside=f.outside_trials, falsify_outside_exits=f.outside_exits)
        out = _out_dir(args)
        if f.counterexample is not None:
            _write(out / f"{sc.name}_counterexample.jsonl", f.counterexample.to_jsonl())
    else:
        report.update(rollouts=0, exits=0, alarms=0, note="empty safe set")
        out = _out_dir(args)
    if args.grid:
        g = grid_oracle(sys_, args.grid, args.T)
        inside = S.contains_points(g.points) if S.pieces else np.zeros(len(g.points), bool)
        report.update(grid_points=int(len(g.points)), grid_violates=int(g.violates.sum()),
                      grid_misclassified=int((inside & g.violates).sum()))
        _write(out / f"{sc.name}_grid.csv", g.to_csv())
    _write(out / f"{sc.name}_simulate.json", _dump(report),
           {"elapsed_s": time.perf_counter() - t0})
    print(_dump(report), end="")
    return EXIT_OK


def _polygon_loop(V: np.ndarray) -> np.ndarray:
    c = V.mean(axis=0)
    ang = np.arctan2(V[:, 1] - c[1], V[:, 0] - c[0])
    return V[np.argsort(ang)]


def cmd_export(args) -> int:
    from .geometry import slice_

    data = json.loads(Path(args.result).read_text())
    S = PolyUnion.from_dict(data["safe_set"]) if "safe_set" in data else PolyUnion.from_dict(data)
    keep = [int(k) - 1 for k in args.dims.split(",")]
    fixed = {}
    for item in (args.fix.split(",") if args.fix else []):
        k, v = item.split("=")
        fixed[int(k) - 1] = float(v)
    if len(keep) != 2 or set(keep) & set(fixed) or len(keep) + len(fixed) != S.dim:
        print("export needs two kept dimensions and fixed values for all others",
              file=sys.stderr)
        return EXIT_INVALID
    dims = sorted(fixed)
    lines = ["piece,vertex,x,y"]
    for p, P in enumerate(S.pieces):
        Q = slice_(P, dims, [fixed[d] for d in dims]) if dims else P
        if Q.is_empty() or not Q.is_full_dim():
            continue
        # slice keeps the remaining coordinates in increasing order
        rest = [d for d in range(S.dim) if d not in fixed]
        V = Q.vertex_array()
        V = V[:, [rest.index(k) for k in keep]]
        for i, v in enumerate(_polygon_loop(V)):
            lines.append(f"{p},{i},{float(v[0])!r},{float(v[1])!r}")
    out = _out_dir(args)
    name = Path(args.result).stem
    _write(out / f"{name}_slice.csv", "\n".join(lines) + "\n",
           {"dims": args.dims, "fix": args.fix})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpsimpact",
                                description="Safe sets and impact metrics of stealthy attacks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario=True):
        if scenario:
            sp.add_argument("scenario", help="scenario JSON file or bundled fixture name")
            sp.add_argument("--lmax", type=int)
            sp.add_argument("--mode", choices=("exact", "convex-inner"))
            sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./cpsimpact_out)")

    sp = sub.add_parser("validate", help="check a scenario file")
    sp.add_argument("scenario")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("reach", help="compute the maximal safe set")
    common(sp)
    sp.add_argument("--n-max", type=int, help="override the dwell-time bound of every channel")
    sp.set_defaults(func=cmd_reach)

    sp = sub.add_parser("metrics", help="impact metrics over a range of n_max")
    common(sp)
    sp.add_argument("--n-values", help="comma-separated n_max values (default: scenario sweep)")
    sp.add_argument("--no-slice", action="store_true", help="skip the e=0 slice metrics")
    sp.set_defaults(func=cmd_metrics)

    sp = sub.add_parser("simulate", help="adversarial rollouts from a computed safe set")
    common(sp)
    sp.add_argument("--n-max", type=int)
    sp.add_argument("--safe-set", required=True, help="reach result JSON")
    sp.add_argument("--budget", type=int, default=1000)
    sp.add_argument("--T", type=int, default=50)
    sp.add_argument("--grid", type=int, default=0, help="grid oracle resolution per axis")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("export", help="2-D slice of a safe set as CSV vertex loops")
    common(sp, scenario=False)
    sp.add_argument("result", help="reach result JSON")
    sp.add_argument("--dims", default="1,2", help="two kept coordinates, 1-based")
    sp.add_argument("--fix", default="", help="fixed coordinates, e.g. 3=0,4=0")
    sp.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        for path, msg in exc.errors:
            print(f"{path or '<root>'}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except CPSImpactError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
