"""Command-line interface: ``fabtune tune|eval|compare|plot-history``.

Exit codes: 0 on success, 1 on runtime failure, 2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .autotune import (ParameterBoundsError, StudyFormatError, append_trial, best, evaluate_on,
                       load_study, run_study, write_header)
from .autotune.samplers import TPEConfig
from .autotune.study import Study
from .config import (ConfigError, data_path, load_params, load_robot, load_scenario, load_space,
                     parse_weights, robot_from_data, scenario_from_data)
from .planner import build_planner
from .report import box_stats, box_svg, history_svg, trajectory_svg
from .world import RobotModel, Scenario, compute_metrics, rollout, test_scenarios

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

DEFAULT_ROBOT = "robot_3link.json"
DEFAULT_SCENARIO = "scenario_ring.json"


class UsageError(Exception):
    """Bad combination of arguments; reported with exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _add_world_args(p: argparse.ArgumentParser, seed_required: bool = True):
    p.add_argument("--robot", help="robot JSON (default: shipped 3-link arm)")
    p.add_argument("--scenario", help="scenario JSON (default: shipped ring scenario)")
    p.add_argument("--space", help="search-space JSON; a partial list overrides the defaults")
    p.add_argument("--weights", help="objective weights as 'distance,path,clearance' or a JSON file")
    p.add_argument("--seed", type=int, required=seed_required, help="master seed (mandatory)")
    p.add_argument("--json", action="store_true", help="print a JSON summary on stdout")


def _add_test_args(p: argparse.ArgumentParser):
    p.add_argument("--scenarios", type=int, default=10, help="number of randomized test scenarios")
    p.add_argument("--obstacle-jitter", type=_nonneg_float, default=0.1)
    p.add_argument("--goal-jitter", type=_nonneg_float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fabtune", description="Autotuned optimization fabrics for planar arms.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("tune", help="run a tuning study")
    _add_world_args(p)
    p.add_argument("--trials", type=int, default=60)
    p.add_argument("--sampler", choices=("tpe", "random"), default="tpe")
    p.add_argument("--out", required=True, help="study file (JSON Lines)")
    p.add_argument("--resume", action="store_true", help="continue the study already in --out")
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--quiet", action="store_true", help="no per-trial progress on stderr")

    p = sub.add_parser("eval", help="evaluate one parameter set on randomized test scenarios")
    _add_world_args(p)
    _add_test_args(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--params", help="parameter JSON {name: value}")
    src.add_argument("--manual", action="store_true", help="use the manual defaults")
    src.add_argument("--from-study", help="use the best trial of a study file")
    p.add_argument("--traj", help="write a trajectory SVG of the first test scenario")
    p.add_argument("--traj-csv", help="write the trajectory log CSV of the first test scenario")
    p.add_argument("--csv", help="write per-scenario metrics CSV")

    p = sub.add_parser("compare", help="compare parameter sources on the same test scenarios")
    _add_world_args(p)
    _add_test_args(p)
    p.add_argument("sources", nargs="+", metavar="LABEL=SOURCE",
                   help="SOURCE is a study .jsonl (best trial), a params .json, or 'manual'")
    p.add_argument("--svg", help="box-plot SVG output")
    p.add_argument("--csv", help="per-scenario cost CSV output")

    p = sub.add_parser("plot-history", help="plot the cost history of a study")
    p.add_argument("study")
    p.add_argument("--out", required=True, help="SVG output")
    p.add_argument("--json", action="store_true")
    return parser


# shared loading ------------------------------------------------------------------

def _load_world(args, header: Study | None = None) -> tuple[RobotModel, Scenario]:
    if args.robot:
        robot = load_robot(args.robot)
    elif header is not None and header.planner:
        robot = robot_from_data(header.planner["robot"], "study header")
    else:
        robot = load_robot(data_path(DEFAULT_ROBOT))
    if args.scenario:
        scenario = load_scenario(args.scenario, robot)
    elif header is not None and header.scenario:
        scenario = scenario_from_data(header.scenario, "study header")
    else:
        scenario = load_scenario(data_path(DEFAULT_SCENARIO), robot)
    if scenario.robot != robot.name:
        raise ConfigError("scenario", f"scenario is for robot {scenario.robot!r}, not {robot.name!r}")
    try:
        scenario.check_robot(robot)
    except ValueError as exc:
        raise ConfigError("scenario", str(exc)) from None
    return robot, scenario


def _load_study_input(path: str) -> Study:
    try:
        study = load_study(path)
    except OSError as exc:
        raise ConfigError(path, f"cannot read study ({exc.strerror})") from None
    except StudyFormatError as exc:
        raise ConfigError(path, str(exc)) from None
    if not study.trials:
        raise ConfigError(path, "study has no trials")
    return study


def _emit(args, summary: dict, lines: Sequence[str]):
    if args.json:
        print(json.dumps(summary, indent=2, allow_nan=False, default=_json_default))
    else:
        for line in lines:
            print(line)


def _json_default(obj):
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _finite_or_none(v: float):
    return v if math.isfinite(v) else None


def _fmt_params(theta: dict) -> list[str]:
    return [f"  {k} = {v!r}" for k, v in theta.items()]


# commands ------------------------------------------------------------------------

def cmd_tune(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if args.batch_size < 1:
        raise UsageError("--batch-size must be at least 1")
    out = Path(args.out)
    existing = None
    if args.resume:
        if not out.exists():
            raise UsageError(f"--resume given but {out} does not exist")
        existing = _load_study_input(str(out)) if out.stat().st_size else None
    robot, scenario = _load_world(args, existing)
    space = load_space(args.space) if args.space else (existing.space if existing else load_space())
    weights = parse_weights(args.weights) if args.weights else (existing.weights if existing else parse_weights(None))
    planner = build_planner(robot, len(scenario.obstacles), space)
    if existing is not None:
        if existing.sampler != args.sampler or existing.master_seed != args.seed:
            raise UsageError("--resume needs the sampler and seed recorded in the study")
        study = existing
    else:
        study = Study(space, args.sampler, TPEConfig().to_dict() if args.sampler == "tpe" else {},
                      weights, args.seed, scenario=scenario.to_dict(),
                      scenario_path=args.scenario or str(data_path(DEFAULT_SCENARIO)),
                      planner=planner.metadata())
        write_header(out, study)

    def record(trial):
        append_trial(out, trial)
        if not args.quiet and not args.json:
            print(f"trial {trial.index:3d}  cost {trial.cost:.6g}  ({trial.termination})",
                  file=sys.stderr)

    run_study(space, scenario, planner, weights, args.trials, args.sampler, args.seed,
              study.sampler_config, study, study.scenario_path, record, args.batch_size)
    top = best(study)
    summary = {"study": str(out), "trials": len(study.trials), "sampler": study.sampler,
               "master_seed": study.master_seed, "best_index": top.index,
               "best_cost": _finite_or_none(top.cost), "best_params": top.params}
    _emit(args, summary, [f"study written to {out} ({len(study.trials)} trials)",
                          f"best trial {top.index}: cost {top.cost!r}", "parameters:",
                          *_fmt_params(top.params)])
    return EXIT_OK


def _resolve_params(args, space):
    if args.params:
        return load_params(args.params, space), f"params:{args.params}"
    if args.manual:
        return space.manual(), "manual"
    study = _load_study_input(args.from_study)
    top = best(study)
    try:
        theta = space.validate(top.params)
    except ParameterBoundsError as exc:
        raise ConfigError(args.from_study, str(exc)) from None
    return theta, f"study:{args.from_study}#{top.index}"


def _test_set(args, robot, scenario):
    if args.scenarios < 1:
        raise UsageError("--scenarios must be at least 1")
    return test_scenarios(scenario, robot, args.scenarios, args.seed,
                          args.obstacle_jitter, args.goal_jitter)


def cmd_eval(args) -> int:
    if not (args.params or args.manual or args.from_study):
        raise UsageError("eval needs --params, --manual or --from-study")
    header = _load_study_input(args.from_study) if args.from_study else None
    robot, scenario = _load_world(args, header)
    space = load_space(args.space) if args.space else (header.space if header else load_space())
    weights = parse_weights(args.weights) if args.weights else (header.weights if header else parse_weights(None))
    theta, origin = _resolve_params(args, space)
    tests = _test_set(args, robot, scenario)
    planner = build_planner(robot, len(scenario.obstacles), space)
    results = evaluate_on(planner, tests, theta, weights)
    rows = []
    lines = [f"parameters: {origin}", f"{'scenario':>8} {'distance':>12} {'path':>10} "
             f"{'clearance':>10} {'total':>12}  termination"]
    for i, res in enumerate(results):
        m = res.metrics
        rows.append({"scenario": i, "cost": res.cost, "cost_distance": m.cost_distance,
                     "cost_path": m.cost_path, "cost_clearance": m.cost_clearance,
                     "reached": m.reached, "termination": res.termination})
        lines.append(f"{i:>8d} {m.cost_distance:>12.6g} {m.cost_path:>10.6g} "
                     f"{m.cost_clearance:>10.6g} {res.cost:>12.6g}  {res.termination}")
    mean = sum(r.cost for r in results) / len(results)
    lines.append(f"mean objective: {mean!r}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    if args.traj or args.traj_csv:
        log = rollout(planner, tests[0], theta)
        if args.traj:
            meta = {"source": origin, "seed": args.seed, "scenario": 0, "robot": robot.name}
            Path(args.traj).write_text(trajectory_svg(robot, tests[0], log, meta))
        if args.traj_csv:
            log.to_csv(args.traj_csv)
    summary = {"parameters": theta, "origin": origin, "seed": args.seed,
               "scenarios": [{**r, "cost": _finite_or_none(r["cost"])} for r in rows],
               "mean_objective": _finite_or_none(mean)}
    _emit(args, summary, lines)
    return EXIT_OK


def _parse_source(text: str):
    label, sep, src = text.partition("=")
    if not sep or not label or not src:
        raise UsageError(f"source {text!r} is not LABEL=SOURCE")
    return label, src


def cmd_compare(args) -> int:
    sources = [_parse_source(s) for s in args.sources]
    if len(sources) < 2:
        raise UsageError("compare needs at least two sources")
    labels = [label for label, _ in sources]
    if len(set(labels)) != len(labels):
        raise UsageError("source labels must be unique")
    robot, scenario = _load_world(args)
    space = load_space(args.space)
    weights = parse_weights(args.weights)
    thetas = {}
    for label, src in sources:
        if src == "manual":
            thetas[label] = space.manual()
        elif src.endswith(".jsonl"):
            study = _load_study_input(src)
            if study.planner and study.planner.get("robot") != robot.to_dict():
                raise ConfigError(src, f"study was tuned for robot {study.planner['robot']['name']!r}, "
                                  f"comparison uses {robot.name!r}")
            try:
                thetas[label] = space.validate(best(study).params)
            except ParameterBoundsError as exc:
                raise ConfigError(src, str(exc)) from None
        else:
            thetas[label] = load_params(src, space)
    tests = _test_set(args, robot, scenario)
    planner = build_planner(robot, len(scenario.obstacles), space)
    costs = {}
    rows = []
    for label, theta in thetas.items():
        results = evaluate_on(planner, tests, theta, weights)
        costs[label] = [r.cost for r in results]
        for i, r in enumerate(results):
            rows.append([label, i, repr(r.cost), repr(r.metrics.cost_distance),
                         repr(r.metrics.cost_path), repr(r.metrics.cost_clearance), r.termination])
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["label", "scenario", "cost", "cost_distance", "cost_path",
                             "cost_clearance", "termination"])
            writer.writerows(rows)
    if args.svg:
        meta = {"sources": " ".join(args.sources), "seed": args.seed, "scenarios": len(tests),
                "robot": robot.name}
        Path(args.svg).write_text(box_svg(costs, meta))
    stats = {label: box_stats(c) for label, c in costs.items()}
    lines = [f"{'label':<16} {'median':>12} {'mean':>12}"]
    summary = {"seed": args.seed, "scenarios": len(tests), "sources": {}}
    for label, c in costs.items():
        mean = sum(c) / len(c)
        lines.append(f"{label:<16} {stats[label]['median']:>12.6g} {mean:>12.6g}")
        summary["sources"][label] = {"median": stats[label]["median"], "mean": _finite_or_none(mean),
                                     "costs": [_finite_or_none(v) for v in c],
                                     "parameters": thetas[label]}
    _emit(args, summary, lines)
    return EXIT_OK


def cmd_plot_history(args) -> int:
    try:
        study = load_study(args.study)
    except OSError as exc:
        print(f"fabtune: cannot read {args.study}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME
    except StudyFormatError as exc:
        print(f"fabtune: corrupt study {args.study}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not study.trials:
        print(f"fabtune: study {args.study} has no trials", file=sys.stderr)
        return EXIT_RUNTIME
    Path(args.out).write_text(history_svg(study, args.study))
    top = best(study)
    _emit(args, {"study": args.study, "out": args.out, "trials": len(study.trials),
                 "best_index": top.index, "best_cost": _finite_or_none(top.cost)},
          [f"wrote {args.out} ({len(study.trials)} trials, best cost {top.cost!r})"])
    return EXIT_OK


COMMANDS = {"tune": cmd_tune, "eval": cmd_eval, "compare": cmd_compare,
            "plot-history": cmd_plot_history}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ParameterBoundsError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
