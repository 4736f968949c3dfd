"""Command-line entry point.

    geotransfer run scenario.json --out reports/
    geotransfer fixtures --out reports/ [--seed N] [--tolerance T]
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .fixtures import builtin_fixtures
from .scenario import ScenarioError, load_scenario, parse_scenario, run_scenario

EXIT_OK = 0
EXIT_TASK_FAILED = 1
EXIT_BAD_SCENARIO = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geotransfer",
        description="Allocate income streams with geometric transfer rules and check their axioms.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log task progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="directory for JSON/CSV reports")
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed (u64)")
        p.add_argument("--tolerance", type=float, default=None, help="override the scenario tolerance")

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario", help="path to a scenario JSON file")
    common(run)

    fx = sub.add_parser("fixtures", help="run the built-in regression scenario")
    common(fx)
    fx.add_argument("--dump", action="store_true", help="also write the scenario itself to <out>/scenario.json")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    if args.tolerance is not None and not 0 < args.tolerance < 1:
        print("error: --tolerance must lie in (0, 1)", file=sys.stderr)
        return EXIT_BAD_SCENARIO

    try:
        if args.command == "run":
            sc = load_scenario(args.scenario)
        else:
            text = json.dumps(builtin_fixtures(), indent=2)
            sc = parse_scenario(text, "<fixtures>")
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_SCENARIO

    if args.seed is not None:
        sc.seed = args.seed
    if args.tolerance is not None:
        sc.tolerance = args.tolerance

    results = run_scenario(sc, args.out)
    if args.command == "fixtures" and args.dump:
        with open(f"{args.out}/scenario.json", "w") as fh:
            json.dump(sc.to_dict(), fh, indent=2)

    for res in results:
        status = "ok" if res.ok else ("ERROR" if res.error else "MISMATCH")
        print(f"{res.name:32s} {res.type:13s} {status}")
        if res.error:
            print(f"    {res.error}")
        for m in res.mismatches:
            print(f"    mismatch: {m}")
    failed = sum(not r.ok for r in results)
    print(f"{len(results) - failed}/{len(results)} tasks ok")
    return EXIT_OK if failed == 0 else EXIT_TASK_FAILED


if __name__ == "__main__":
    sys.exit(main())
