#!/usr/bin/env python3
"""Run the whole built-in scenario catalog and summarize the verdicts.

Equivalent to ``shadowlab run all`` plus a compact closing table; handy when
poking at seeds or window sizes across the board.

    python3 scripts/run_all_scenarios.py [--out DIR] [--seed S] [--parallel]
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor

from shadowlab.scenarios import SCENARIO_NAMES, builtin_config, run_scenario


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="out", help="artifact directory")
    parser.add_argument("--seed", type=int, default=None, help="override every scenario seed")
    parser.add_argument("--parallel", action="store_true")
    args = parser.parse_args()

    configs = []
    for name in SCENARIO_NAMES:
        config = builtin_config(name)
        if args.seed is not None:
            config.seed = args.seed
        configs.append(config)

    if args.parallel:
        with ThreadPoolExecutor(max_workers=4) as pool:
            reports = list(pool.map(lambda c: run_scenario(c, args.out), configs))
    else:
        reports = [run_scenario(c, args.out) for c in configs]

    print()
    print(f"{'scenario':28s} {'verdict':18s} {'time':>7s}  artifacts")
    worst = 0
    for report in reports:
        print(f"{report.name:28s} {report.verdict:18s} {report.wall_time:6.2f}s  {len(report.artifacts)}")
        worst = max(worst, report.exit_code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
