"""Command line entry point: ``edcasim {simulate,sweep,grid}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError
from .metrics import export_csv
from .scenario import load_scenario, standard_grid
from .sweep import sweep


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="edcasim", description="EDCA / QCAAAE uplink contention simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one scenario file under one policy")
    sim.add_argument("--scenario", required=True, help="scenario file (INI format)")
    sim.add_argument("--policy", choices=["edca", "qcaaae"], required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="CSV output path")

    sw = sub.add_parser("sweep", help="run a scenario grid under both policies")
    sw.add_argument("--grid", choices=["paper"], default="paper", help="the standard 40-scenario grid")
    sw.add_argument("--scale", type=_positive_int, default=1, help="divide station counts by this factor")
    sw.add_argument("--seeds", type=_positive_int, default=5, help="number of seeds (0..n-1)")
    sw.add_argument("--out-dir", required=True)
    sw.add_argument("--duration", type=float, default=10.0, help="simulated seconds per run")
    sw.add_argument("--warmup", type=float, default=1.0, help="excluded start-up seconds")
    sw.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")
    sw.add_argument("--only", action="append", default=[], help="restrict to these scenario ids")
    sw.add_argument("--no-figures", action="store_true")

    gr = sub.add_parser("grid", help="inspect the scenario grid")
    gr.add_argument("--list", action="store_true", required=True, help="print scenario ids")
    gr.add_argument("--scale", type=_positive_int, default=1)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "simulate":
            from .kernel import run

            scenario = load_scenario(args.scenario)
            ledger = run(scenario, args.policy, args.seed)
            export_csv([ledger], args.out)
            return 0

        if args.command == "grid":
            for spec in standard_grid(args.scale):
                print(spec.scenario_id)
            return 0

        grid = standard_grid(args.scale, duration=args.duration, warmup=args.warmup)
        if args.only:
            wanted = set(args.only)
            unknown = wanted - {s.scenario_id for s in grid}
            if unknown:
                raise ConfigError(f"unknown scenario id(s): {', '.join(sorted(unknown))}")
            grid = [s for s in grid if s.scenario_id in wanted]
        result = sweep(
            grid,
            ["edca", "qcaaae"],
            list(range(args.seeds)),
            out_dir=args.out_dir,
            jobs=args.jobs,
            figures=not args.no_figures,
        )
        for sid, policy, seed, err in result.failures:
            print(f"FAILED {sid} {policy} seed={seed}: {err}", file=sys.stderr)
        return 0 if result.ok else 1
    except (ConfigError, OSError) as exc:
        print(f"edcasim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
