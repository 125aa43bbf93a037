"""Command-line entry point.

    shadowlab run <name|config.json> [--window N] [--seed S] [--out DIR] [--parallel]
    shadowlab list [--json]
    shadowlab plot <trace.csv> --kind {orbit2d,slack,boxwidth} [--out FILE]

Exit codes: 0 when every run matches the expected result, 2 when some run
contradicts it, 64 for usage or configuration errors, 70 for internal
contract violations.  ``run all`` executes the whole built-in catalog; with
``--parallel`` the independent scenarios run concurrently (they share nothing
but read-only catalogs).  The only environment override is OUTPUT_DIR for the
default artifact directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigError, ContractViolation, PositivityError
from .plots import emit_plot
from .scenarios import SCENARIO_NAMES, list_scenarios, load_config, run_scenario

USAGE_EXIT = 64
INTERNAL_EXIT = 70


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _build_parser() -> _Parser:
    parser = _Parser(prog="shadowlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="run a built-in scenario, 'all', or a config file")
    run.add_argument("scenario", help="built-in name, 'all', or path to a JSON config")
    run.add_argument("--window", type=int, default=None, help="override the window limit")
    run.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    run.add_argument("--out", default=None, help="output directory (default: out/)")
    run.add_argument("--parallel", action="store_true", help="run independent scenarios concurrently")

    lst = sub.add_parser("list", help="list the built-in scenarios")
    lst.add_argument("--json", action="store_true", help="machine-readable catalog")

    plot = sub.add_parser("plot", help="render a CSV trace to SVG")
    plot.add_argument("csv", help="trace file produced by a run")
    plot.add_argument("--kind", required=True, choices=["orbit2d", "slack", "boxwidth"])
    plot.add_argument("--out", default=None, help="output SVG path")
    return parser


def _run_command(args) -> int:
    out_dir = args.out or os.environ.get("OUTPUT_DIR") or "out"
    names = SCENARIO_NAMES if args.scenario == "all" else [args.scenario]
    configs = []
    for name in names:
        config = load_config(name)
        if args.window is not None:
            config.window_limit = args.window
        if args.seed is not None:
            config.seed = args.seed
        configs.append(config)

    if args.parallel and len(configs) > 1:
        with ThreadPoolExecutor(max_workers=min(4, len(configs))) as pool:
            reports = list(pool.map(lambda c: run_scenario(c, out_dir), configs))
    else:
        reports = [run_scenario(c, out_dir) for c in configs]

    worst = 0
    for report in reports:
        print(f"{report.name}: {report.verdict} ({report.wall_time:.2f}s, "
              f"{len(report.artifacts)} artifacts)")
        worst = max(worst, report.exit_code)
    return worst


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return USAGE_EXIT
    try:
        if args.command == "run":
            return _run_command(args)
        if args.command == "list":
            catalog = list_scenarios()
            if args.json:
                print(json.dumps({"scenarios": catalog}, indent=2, sort_keys=True))
            else:
                for entry in catalog:
                    print(f"{entry['name']:26s} {entry['summary']}")
            return 0
        if args.command == "plot":
            out = emit_plot(args.csv, args.kind, args.out)
            print(out)
            return 0
    except ConfigError as exc:
        print(f"shadowlab: config error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (ContractViolation, PositivityError) as exc:
        print(f"shadowlab: contract violation: {exc}", file=sys.stderr)
        return INTERNAL_EXIT
    except FileNotFoundError as exc:
        print(f"shadowlab: {exc}", file=sys.stderr)
        return USAGE_EXIT
    return USAGE_EXIT


def app() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    app()
