"""Command line front end.

Exit codes: 0 success, 2 usage, 3 bad data, 4 a solver limit left a gap,
5 internal failure. Set MSD_LOG=DEBUG|INFO|WARNING|ERROR to adjust logging.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

from .config import RunConfig
from .coverage import coverage_report
from .errors import DataError, SolverLimitError
from .fleet import find_delta, min_fleet
from .instance import (
    DEFAULT_GEN_PARAMS,
    generate_synthetic,
    load_instance,
    save_instance,
    validate_instance,
)
from .joint import run_joint
from .reports import (
    SweepRow,
    config_fingerprint,
    deployment_outputs,
    deployment_to_dict,
    instrumented_trips,
    read_deployment,
    render_coverage_heatmap,
    render_reward_curve,
    render_saturation_chart,
    write_coverage_csv,
    write_deployment,
    write_saturation_csv,
    write_summary_json,
    write_sweep_csv,
    write_timings,
)
from .results import Deployment
from .select import select_lines_full, select_lines_partial
from .sequential import run_sequential

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_LIMIT = 4
EXIT_INTERNAL = 5


def _parse_delta(text: str):
    if text in ("auto", "none"):
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'auto', 'none' or minutes, got {text!r}"
        ) from None
    if value < 0:
        raise argparse.ArgumentTypeError("idle cap must be nonnegative")
    return value


def _parse_sensor_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            points = list(range(int(lo), int(hi) + 1))
        else:
            points = [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected 'A..B' or comma list, got {text!r}"
        ) from None
    if not points or any(p < 0 for p in points):
        raise argparse.ArgumentTypeError("sensor counts must be nonnegative")
    return points


def _parse_mesh(text: str) -> tuple[int, int]:
    try:
        rows, cols = text.lower().split("x", 1)
        return int(rows), int(cols)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msd",
        description="Mobile sensor deployment on bus fleets: select lines, "
        "form trip chains, assign sensors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_solver_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--time-limit", type=float, default=None, metavar="S",
                       help="wall clock budget per solve, seconds")
        p.add_argument("--node-cap", type=int, default=None, metavar="N",
                       help="branch and bound node budget per solve")
        p.add_argument("--dump-models", default=None, metavar="DIR",
                       help="write each optimization model in LP format here")

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("instance")

    p = sub.add_parser("gen", help="generate a synthetic instance")
    p.add_argument("--seed", type=int, default=DEFAULT_GEN_PARAMS["seed"])
    p.add_argument("--lines", type=int, default=DEFAULT_GEN_PARAMS["n_lines"])
    p.add_argument("--trips-per-line", type=int,
                   default=DEFAULT_GEN_PARAMS["trips_per_line"])
    p.add_argument("--delta", type=int, default=DEFAULT_GEN_PARAMS["interval_minutes"],
                   metavar="MIN", help="sensing interval length in minutes")
    p.add_argument("--mesh", type=_parse_mesh, default=DEFAULT_GEN_PARAMS["mesh_dims"],
                   metavar="RxC")
    p.add_argument("--sensors", type=int, default=DEFAULT_GEN_PARAMS["sensor_budget"])
    p.add_argument("--gamma", type=float, default=DEFAULT_GEN_PARAMS["gamma"])
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("select", help="pick the minimum set of lines")
    p.add_argument("instance")
    p.add_argument("--gamma", type=float, default=None,
                   help="required share of coverable grids, (0, 1]")
    p.add_argument("-o", "--output", required=True)
    add_solver_flags(p)

    p = sub.add_parser("fleet", help="minimum fleets and trip chains per line")
    p.add_argument("instance")
    p.add_argument("--lines", default=None, metavar="SELECTION",
                   help="selection JSON; default is every line")
    p.add_argument("--delta", type=_parse_delta, default="none",
                   help="idle cap: auto, none, or minutes")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("solve-seq", help="minimum fleets first, sensors second")
    p.add_argument("instance")
    p.add_argument("--sensors", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--mode", choices=("auto", "exact", "greedy"), default="auto")
    p.add_argument("-o", "--output", required=True)
    add_solver_flags(p)

    p = sub.add_parser("solve-joint", help="chains and sensors chosen together")
    p.add_argument("instance")
    p.add_argument("--sensors", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--delta", type=_parse_delta, default="auto",
                   help="idle cap policy: auto, none, or minutes")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--saturation-exhaustive", action="store_true",
                   help="probe every sensor count up to the fleet size")
    p.add_argument("-o", "--output", required=True)
    add_solver_flags(p)

    p = sub.add_parser("sweep", help="solve across a range of budgets")
    p.add_argument("instance")
    p.add_argument("--sensors", type=_parse_sensor_range, required=True,
                   metavar="A..B")
    p.add_argument("--approach", choices=("seq", "joint", "both"), default="both")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--mode", choices=("auto", "exact", "greedy"), default="auto")
    p.add_argument("--delta", type=_parse_delta, default="auto")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output", required=True, metavar="DIR")
    add_solver_flags(p)

    p = sub.add_parser("report", help="tables and figures for a deployment")
    p.add_argument("instance")
    p.add_argument("deployment")
    p.add_argument("--compare", default=None, metavar="DEPLOYMENT",
                   help="second deployment to compare against")
    p.add_argument("-o", "--output", required=True, metavar="DIR")

    return parser


def _config_from(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        sensors=getattr(args, "sensors", None),
        gamma=getattr(args, "gamma", None),
        mode=getattr(args, "mode", "auto"),
        delta_policy=getattr(args, "delta", "auto"),
        saturation_exhaustive=getattr(args, "saturation_exhaustive", False),
        jobs=getattr(args, "jobs", 1),
        time_limit_s=getattr(args, "time_limit", None),
        node_cap=getattr(args, "node_cap", None),
        dump_dir=getattr(args, "dump_models", None),
    )


def _write_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _cmd_validate(args) -> int:
    report = validate_instance(load_instance(args.instance))
    if report.ok:
        print(f"{args.instance}: OK")
        return EXIT_OK
    for violation in report.violations:
        print(f"{args.instance}: {violation}", file=sys.stderr)
    return EXIT_DATA


def _cmd_gen(args) -> int:
    inst = generate_synthetic(
        {
            "seed": args.seed,
            "n_lines": args.lines,
            "trips_per_line": args.trips_per_line,
            "interval_minutes": args.delta,
            "mesh_dims": args.mesh,
            "sensor_budget": args.sensors,
            "gamma": args.gamma,
        }
    )
    save_instance(inst, args.output)
    print(
        f"wrote {args.output}: {len(inst.lines)} lines, "
        f"{len(inst.trips())} trips, {len(inst.mesh)} grids"
    )
    return EXIT_OK


def _cmd_select(args) -> int:
    inst = load_instance(args.instance)
    gamma = args.gamma if args.gamma is not None else inst.gamma
    config = _config_from(args)
    if gamma == 1.0:
        sel = select_lines_full(inst, config.limits())
    else:
        sel = select_lines_partial(inst, gamma, config.limits())
    _write_json(
        args.output,
        {
            "chosen_line_ids": list(sel.chosen_line_ids),
            "covered_grids": list(sel.covered_grids),
            "coverable": list(sel.coverable),
            "gamma": sel.gamma,
            "status": sel.status,
            "gap": sel.gap,
        },
    )
    print(
        f"chose {len(sel.chosen_line_ids)} lines covering "
        f"{len(sel.covered_grids)}/{len(sel.coverable)} coverable grids"
    )
    return EXIT_LIMIT if sel.status != "optimal" else EXIT_OK


def _cmd_fleet(args) -> int:
    inst = load_instance(args.instance)
    lines = [l for l in inst.lines if l.trips]
    if args.lines:
        chosen = json.loads(Path(args.lines).read_text(encoding="utf-8"))
        wanted = set(chosen["chosen_line_ids"])
        lines = [l for l in lines if l.id in wanted]
    rows = []
    for line in lines:
        if args.delta == "auto":
            cap = find_delta(line)
        elif args.delta == "none":
            cap = None
        else:
            cap = args.delta
        result = min_fleet(line, cap)
        rows.append(
            {
                "line_id": line.id,
                "n_trips": result.n_trips,
                "min_fleet_size": result.min_fleet_size,
                "idle_cap": result.idle_cap,
                "n_feasible_pairs": result.n_feasible_pairs,
                "chains": [list(c.trip_ids) for c in result.chains],
            }
        )
    _write_json(args.output, {"delta_policy": str(args.delta), "lines": rows})
    total = sum(r["min_fleet_size"] for r in rows)
    print(f"{len(rows)} lines need {total} buses in total")
    return EXIT_OK


def _solve(args, runner) -> int:
    t0 = time.perf_counter()
    inst = load_instance(args.instance)
    config = _config_from(args)
    t1 = time.perf_counter()
    dep: Deployment = runner(inst, config)
    t2 = time.perf_counter()
    dep = dataclasses.replace(dep, fingerprint=config_fingerprint(inst, config))
    paths = deployment_outputs(args.output)
    write_deployment(paths["deployment"], dep)
    cov = coverage_report(
        inst, instrumented_trips(inst, deployment_to_dict(dep))
    )
    write_coverage_csv(paths["coverage"], inst, cov)
    t3 = time.perf_counter()
    timings = {"load": t1 - t0, "solve": t2 - t1, "write": t3 - t2}
    timings.update({f"gap:{s.stage}": s.gap for s in dep.stages})
    write_timings(paths["timings"], timings)
    print(
        f"{dep.approach}: reward {dep.reward:.6f} with {dep.sensors_used}/"
        f"{dep.budget} sensors, worst gap {dep.worst_gap:.2e}, "
        f"wrote {paths['deployment']}"
    )
    if dep.hit_limit:
        print("warning: a solver limit was hit; results carry a gap",
              file=sys.stderr)
        return EXIT_LIMIT
    return EXIT_OK


def _cmd_sweep(args) -> int:
    inst = load_instance(args.instance)
    approaches = ("sequential", "joint") if args.approach == "both" else (
        {"seq": "sequential", "joint": "joint"}[args.approach],
    )
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows: list[SweepRow] = []
    limited = False
    base_config = _config_from(args)
    for sensors in args.sensors:
        for approach in approaches:
            config = dataclasses.replace(base_config, sensors=sensors)
            dep = (run_sequential if approach == "sequential" else run_joint)(
                inst, config
            )
            cov = coverage_report(
                inst, instrumented_trips(inst, deployment_to_dict(dep))
            )
            rows.append(
                SweepRow(
                    sensors=sensors,
                    approach=approach,
                    reward=dep.reward,
                    covered_share=cov.covered_share,
                    sensors_used=dep.sensors_used,
                    worst_gap=dep.worst_gap,
                )
            )
            limited = limited or dep.hit_limit
    write_sweep_csv(out_dir / "sweep.csv", rows)
    render_reward_curve(out_dir / "reward_vs_budget.png", rows)
    print(f"wrote {out_dir / 'sweep.csv'} with {len(rows)} points")
    if limited:
        print("warning: some sweep points hit solver limits", file=sys.stderr)
        return EXIT_LIMIT
    return EXIT_OK


def _check_recomputable(doc: dict, cov_reward: float, path: str) -> None:
    # every published reward must be reproducible from its own chain list
    if cov_reward != doc["reward"]:
        raise DataError(
            f"{path}: stored reward {doc['reward']} does not match the "
            f"recomputation {cov_reward}; file and instance disagree"
        )


def _cmd_report(args) -> int:
    inst = load_instance(args.instance)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = read_deployment(args.deployment)
    cov = coverage_report(inst, instrumented_trips(inst, doc))
    _check_recomputable(doc, cov.reward, args.deployment)
    write_coverage_csv(out_dir / "coverage.csv", inst, cov)
    write_summary_json(
        out_dir / "summary.json",
        cov,
        {
            "approach": doc.get("approach"),
            "budget": doc.get("budget"),
            "sensors_used": doc.get("sensors_used"),
            "fingerprint": doc.get("fingerprint"),
        },
    )
    render_coverage_heatmap(
        out_dir / "coverage_heatmap.png", inst, cov,
        title=f"{doc.get('approach', 'deployment')} coverage",
    )
    if any(line.get("saturation_rewards") for line in doc["lines"]):
        write_saturation_csv(out_dir / "saturation.csv", doc)
        render_saturation_chart(out_dir / "saturation.png", doc)
    if args.compare:
        other = read_deployment(args.compare)
        other_cov = coverage_report(inst, instrumented_trips(inst, other))
        _check_recomputable(other, other_cov.reward, args.compare)
        render_coverage_heatmap(
            out_dir / "coverage_heatmap_compare.png", inst, other_cov,
            title=f"{other.get('approach', 'compare')} coverage",
        )
        pairs = [(doc, cov), (other, other_cov)]
        with open(out_dir / "comparison.csv", "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["approach", "reward", "covered_pairs", "covered_share",
                 "completely_covered_grids"]
            )
            for d, c in pairs:
                writer.writerow(
                    [d.get("approach"), repr(c.reward), len(c.covered),
                     repr(c.covered_share), len(c.completely_covered)]
                )
        by_approach = {d.get("approach"): c.reward for d, c in pairs}
        if {"joint", "sequential"} <= by_approach.keys():
            print(
                "joint reward >= sequential reward: "
                f"{by_approach['joint'] >= by_approach['sequential']}"
            )
    print(f"wrote report to {out_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    level = os.environ.get("MSD_LOG", "WARNING").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        level = "WARNING"
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    handlers = {
        "validate": _cmd_validate,
        "gen": _cmd_gen,
        "select": _cmd_select,
        "fleet": _cmd_fleet,
        "solve-seq": lambda a: _solve(a, run_sequential),
        "solve-joint": lambda a: _solve(a, run_joint),
        "sweep": _cmd_sweep,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SolverLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # keep the contract: never a bare traceback
        log.debug("internal failure", exc_info=True)
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
