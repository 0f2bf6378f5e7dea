"""Command-line front end: run scenarios, validate them, and render SVG
plots from the emitted CSVs.

Outputs of `run` (all deterministic for a fixed scenario and seed):
  trajectories.csv  agent,k,y1,y2
  metrics.csv       agent,k,u1..um,delta_w,local_w,in_range,range_nonempty,
                    comm_events,stageA_ms,stageB_ms,stageC_ms,bound_violation
  global_w.csv      k,w2,subsampled
  gains.csv         per-step quadratic gain terms and inputs (2-D inputs)
  reference.csv     the reference cloud actually used (x,y,weight)

Wall-time columns are written as 0.000 unless --timing is given, keeping
the CSVs byte-reproducible across runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .controller import GainTerms
from .engine import RunResult, Scenario, run as engine_run
from .errors import DpcoverError, InputError, ScenarioError
from .linalg import _feasible_point
from .scenario import build_scenario, load_scenario
from .svgplot import plot_ellipses, plot_series, plot_trajectories

PLOT_KINDS = ("trajectories", "deltaw", "ellipses", "globalw")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_outputs(out_dir: Path, scenario: Scenario, result: RunResult,
                   timing: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    m_max = max(s.m for s in scenario.systems)

    traj_rows = []
    for agent, traj in enumerate(result.trajectories):
        for k, (y1, y2) in enumerate(traj, start=1):
            traj_rows.append((agent, k, y1, y2))
    _write_csv(out_dir / "trajectories.csv", ["agent", "k", "y1", "y2"], traj_rows)

    u_cols = [f"u{i + 1}" for i in range(m_max)]
    metric_rows = []
    for r in result.records:
        u = list(r.u) + [""] * (m_max - len(r.u))
        metric_rows.append(
            (r.agent, r.k, *u, r.delta_w_pred, r.local_w, r.in_range,
             r.range_nonempty, r.comm_events,
             f"{r.stage_a_ms:.3f}" if timing else "0.000",
             f"{r.stage_b_ms:.3f}" if timing else "0.000",
             f"{r.stage_c_ms:.3f}" if timing else "0.000",
             r.bound_violation))
    _write_csv(out_dir / "metrics.csv",
               ["agent", "k", *u_cols, "delta_w", "local_w", "in_range",
                "range_nonempty", "comm_events", "stageA_ms", "stageB_ms",
                "stageC_ms", "bound_violation"], metric_rows)

    _write_csv(out_dir / "global_w.csv", ["k", "w2", "subsampled"],
               [(k, w, sub) for k, w, sub in result.global_w])

    _write_csv(out_dir / "reference.csv", ["x", "y", "weight"],
               [(x, y, w) for (x, y), w in zip(scenario.cloud.positions,
                                               scenario.cloud.weights)])

    if m_max == 2 and all(s.m == 2 for s in scenario.systems):
        gain_rows = [(r.agent, r.k, r.gains.D1[0, 0], r.gains.D1[0, 1],
                      r.gains.D1[1, 1], r.gains.D2[0], r.gains.D2[1], r.gains.D3,
                      r.u[0], r.u[1], r.u_unconstrained[0], r.u_unconstrained[1])
                     for r in result.records]
        _write_csv(out_dir / "gains.csv",
                   ["agent", "k", "d1_11", "d1_12", "d1_22", "d2_1", "d2_2",
                    "d3", "u1", "u2", "uu1", "uu2"], gain_rows)


def cmd_run(args) -> int:
    try:
        path = Path(args.scenario)
        doc = json.loads(path.read_text(encoding="utf-8"))
        if args.seed is not None:
            # applied before the reference cloud is sampled
            doc["seed"] = args.seed
        scenario = build_scenario(doc, base_dir=path.parent)
    except (ScenarioError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.k_interval is not None:
        scenario = replace(scenario, global_w_interval=args.k_interval)
    try:
        result = engine_run(scenario, parallel=args.parallel)
        _write_outputs(Path(args.out), scenario, result, timing=args.timing)
    except DpcoverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(result.records)} step records to {args.out}")
    return 0


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise InputError(f"missing {path}; run the scenario first")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        rows = list(reader)
    if header is None:
        raise InputError(f"empty file {path}")
    return header, rows


def cmd_plot(args) -> int:
    out_dir = Path(args.out)
    lo, hi = (args.window if args.window else (None, None))
    if lo is not None and hi < lo:
        print("error: empty window", file=sys.stderr)
        return 2

    def in_window(k: int) -> bool:
        return (lo is None or lo <= k) and (hi is None or k <= hi)

    try:
        if args.kind == "trajectories":
            _, rows = _read_csv(out_dir / "trajectories.csv")
            _, ref_rows = _read_csv(out_dir / "reference.csv")
            trajs: dict[int, list] = {}
            for agent, k, y1, y2 in rows:
                if in_window(int(k)):
                    trajs.setdefault(int(agent), []).append((float(y1), float(y2)))
            trajs_np = {a: np.asarray(v) for a, v in trajs.items()}
            ref = np.asarray([[float(x), float(y)] for x, y, _ in ref_rows])
            svg = plot_trajectories(trajs_np, ref)
        elif args.kind in ("deltaw", "globalw"):
            if args.kind == "deltaw":
                header, rows = _read_csv(out_dir / "metrics.csv")
                ai, ki, vi = (header.index(c) for c in ("agent", "k", "delta_w"))
                series: dict[int, tuple[list, list]] = {}
                for row in rows:
                    if in_window(int(row[ki])):
                        ks, vs = series.setdefault(int(row[ai]), ([], []))
                        ks.append(int(row[ki]))
                        vs.append(float(row[vi]))
                svg = plot_series({a: (np.asarray(k), np.asarray(v))
                                   for a, (k, v) in series.items()},
                                  "Predicted change in squared local W2", "delta W")
            else:
                _, rows = _read_csv(out_dir / "global_w.csv")
                pairs = [(int(k), float(w)) for k, w, _ in rows if in_window(int(k))]
                if not pairs:
                    raise InputError("empty window")
                ks, ws = zip(*pairs)
                svg = plot_series({0: (np.asarray(ks), np.asarray(ws))},
                                  "Global 2-Wasserstein distance", "W2")
        elif args.kind == "ellipses":
            header, rows = _read_csv(out_dir / "gains.csv")
            cols = {c: header.index(c) for c in header}
            agents = sorted({int(r[cols["agent"]]) for r in rows})
            first = agents[0] if agents else 0
            steps = []
            for r in rows:
                k = int(r[cols["k"]])
                if int(r[cols["agent"]]) == first and in_window(k):
                    d1 = np.array([[float(r[cols["d1_11"]]), float(r[cols["d1_12"]])],
                                   [float(r[cols["d1_12"]]), float(r[cols["d1_22"]])]])
                    gt = GainTerms(D1=d1,
                                   D2=np.array([float(r[cols["d2_1"]]),
                                                float(r[cols["d2_2"]])]),
                                   D3=float(r[cols["d3"]]))
                    steps.append({"k": k, "gains": gt,
                                  "u": np.array([float(r[cols["u1"]]),
                                                 float(r[cols["u2"]])]),
                                  "u_unc": np.array([float(r[cols["uu1"]]),
                                                     float(r[cols["uu2"]])])})
            svg = plot_ellipses(steps)
        else:
            print(f"error: unknown plot kind {args.kind}", file=sys.stderr)
            return 2
    except (DpcoverError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out_path = out_dir / f"{args.kind}.svg"
    out_path.write_text(svg, encoding="utf-8")
    print(f"wrote {out_path}")
    return 0


def cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except (ScenarioError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    for i, sys_ in enumerate(scenario.systems):
        print(f"agent {i}: n={sys_.n} m={sys_.m} p={sys_.p} P={sys_.P} "
              f"M={scenario.budgets[i]}")
    print(f"reference cloud: {scenario.cloud.n_points} points")
    if scenario.input_constraints is not None:
        try:
            _feasible_point(*scenario.input_constraints)
        except DpcoverError:
            print("invalid: input constraint polytope is empty", file=sys.stderr)
            return 1
        print(f"input constraints: {scenario.input_constraints[0].shape[0]} rows, feasible")
    else:
        print("input constraints: per-system bounds or unconstrained")
    print("scenario is valid")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dpcover",
        description="Multi-agent non-uniform coverage simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario and write CSVs")
    p_run.add_argument("--scenario", required=True, help="scenario JSON path")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="seed override")
    p_run.add_argument("--parallel", type=lambda s: s.lower() in ("1", "true", "yes"),
                       default=False, metavar="BOOL", help="per-agent thread pool")
    p_run.add_argument("--k-interval", type=int, default=None,
                       help="global-W evaluation interval override")
    p_run.add_argument("--timing", action="store_true",
                       help="write measured stage wall times into metrics.csv "
                            "(breaks byte-reproducibility)")
    p_run.set_defaults(func=cmd_run)

    p_plot = sub.add_parser("plot", help="render an SVG from run outputs")
    p_plot.add_argument("--out", required=True, help="directory holding run CSVs")
    p_plot.add_argument("--kind", required=True, choices=PLOT_KINDS)
    p_plot.add_argument("--window", nargs=2, type=int, metavar=("LO", "HI"),
                        default=None, help="restrict to steps LO..HI")
    p_plot.set_defaults(func=cmd_plot)

    p_val = sub.add_parser("validate", help="check a scenario without running")
    p_val.add_argument("--scenario", required=True)
    p_val.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
