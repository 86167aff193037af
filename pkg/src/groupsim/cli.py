"""``groupsim run|gen|plot`` command-line front end.

Exit codes: 0 success, 2 input errors, 3 run truncated at max_steps.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Optional, Sequence

from .benchmarks import DEFAULT_COUNTS, generate
from .engine import run
from .io import (
    ScenarioError,
    TrajectoryError,
    dump_metrics,
    dump_scenario,
    format_trajectory,
    load_scenario,
    metrics_document,
    read_trajectory,
)
from .plot import render_svg

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TRUNCATED = 3

MODES = {"dynamic": "dynamic_grouping", "orca": "orca_only"}


def _fail(msg: str) -> int:
    print(f"groupsim: {msg}", file=sys.stderr)
    return EXIT_INPUT


def _emit(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except (OSError, ScenarioError) as exc:
        return _fail(str(exc))
    changes = {}
    if args.mode is not None:
        changes["mode"] = MODES[args.mode]
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.max_steps is not None:
        if args.max_steps < 0:
            return _fail("--max-steps must be non-negative")
        changes["max_steps"] = args.max_steps
    scenario.params = dataclasses.replace(scenario.params, **changes)

    rows, metrics = run(scenario)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.scenario).name
    for suffix in (".json",):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    summary = metrics.summary(len(scenario.agents), scenario.params.max_steps)
    doc = metrics_document(
        summary,
        metrics.group_counts,
        mode=scenario.params.mode,
        seed=scenario.params.seed,
        agents=len(scenario.agents),
        steps=len(metrics.group_counts),
    )
    (out_dir / f"{stem}.metrics.json").write_text(dump_metrics(doc), encoding="utf-8")
    if not args.metrics_only:
        (out_dir / f"{stem}.traj.csv").write_text(format_trajectory(rows), encoding="utf-8")
    if args.plot:
        svg = render_svg(rows, scenario.obstacles)
        (out_dir / f"{stem}.svg").write_text(svg, encoding="utf-8")
    return EXIT_TRUNCATED if metrics.truncated else EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    if args.name not in DEFAULT_COUNTS:
        return _fail(f"unknown benchmark {args.name!r}; valid names: {', '.join(DEFAULT_COUNTS)}")
    if args.agents is not None and args.agents < 1:
        return _fail("--agents must be positive")
    try:
        scenario = generate(args.name, args.agents, args.seed)
    except RuntimeError as exc:
        return _fail(str(exc))
    _emit(dump_scenario(scenario), args.out)
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    try:
        rows = read_trajectory(args.trajectory)
    except OSError as exc:
        return _fail(str(exc))
    except TrajectoryError as exc:
        return _fail(f"{args.trajectory}: {exc}")
    obstacles = []
    radii = {}
    if args.scenario:
        try:
            s = load_scenario(args.scenario)
        except (OSError, ScenarioError) as exc:
            return _fail(str(exc))
        obstacles = s.obstacles
        radii = {a.id: a.radius for a in s.agents}
    try:
        svg = render_svg(rows, obstacles, args.frame, radii)
    except ValueError as exc:
        return _fail(str(exc))
    _emit(svg, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groupsim", description="Dynamic group crowd simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario file")
    p.add_argument("scenario", help="scenario JSON path")
    p.add_argument("--mode", choices=sorted(MODES), help="override the scenario mode")
    p.add_argument("--seed", type=int, help="override the scenario RNG seed")
    p.add_argument("--max-steps", type=int, help="override the step limit")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--plot", action="store_true", help="also write NAME.svg")
    p.add_argument("--metrics-only", action="store_true", help="skip the trajectory CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen", help="write a built-in benchmark scenario")
    p.add_argument("name", help=f"one of: {', '.join(DEFAULT_COUNTS)}")
    p.add_argument("--agents", type=int, help="agent count (default: the benchmark's)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("plot", help="render a trajectory CSV as SVG")
    p.add_argument("trajectory")
    p.add_argument("--scenario", help="scenario JSON for obstacles and radii")
    p.add_argument("--frame", type=int, help="draw agent discs at this step instead of paths")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
