"""Command-line entry point: ``simulate``, ``calibrate`` and ``validate-pattern``.

Exit codes: 0 success, 1 configuration error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .calibration import CALIBRATION_ROUNDS, CALIBRATION_SEED, TargetRates, calibrate
from .config import load_config, load_pattern
from .errors import ConfigError
from .harness import run_eval
from .planner import flatten

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2


def _simulate(args) -> int:
    cfg = load_config(args.config)
    changes = {}
    if args.rounds is not None:
        changes["rounds"] = args.rounds
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        cfg = cfg.with_overrides(**changes)
    report = run_eval(cfg, jobs=args.jobs)
    text = report.to_tsv() if args.format == "tsv" else report.to_text()
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _calibrate(args) -> int:
    cfg = load_config(args.config)
    targets = TargetRates.from_table(Path(args.target_table).read_text(encoding="utf-8"))
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    result = calibrate(cfg, targets, rounds=args.rounds, seed=args.seed, jobs=args.jobs, log=log)
    print(f"# fitted over {result.rounds} rounds, seed {result.seed}: "
          f"alignment failure {result.align_failure:.4f} (target {targets.align_failure:.4f}), "
          f"placing failure {result.place_failure:.4f} (target {targets.place_failure:.4f})")
    print(f"freeze_probability_align = {result.freeze_probability_align}")
    print(f"freeze_probability_place = {result.freeze_probability_place}")
    return EXIT_OK


def _validate_pattern(args) -> int:
    layers = load_pattern(args.path)
    print(f"ok: {len(layers)} layers, {len(flatten(layers))} bricks")
    for i, layer in enumerate(layers, start=1):
        print(f"  layer {i}: {' '.join(map(str, layer))}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brickwork", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run evaluation rounds and print the success table")
    sim.add_argument("--config", required=True)
    sim.add_argument("--rounds", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--report", help="write the report here instead of stdout")
    sim.add_argument("--format", choices=("text", "tsv"), default="text")
    sim.add_argument("--jobs", type=int, default=1, help="worker processes")
    sim.set_defaults(func=_simulate)

    cal = sub.add_parser("calibrate", help="fit localization-freeze rates to a target table")
    cal.add_argument("--config", required=True)
    cal.add_argument("--target-table", required=True)
    cal.add_argument("--rounds", type=int, default=CALIBRATION_ROUNDS)
    cal.add_argument("--seed", type=int, default=CALIBRATION_SEED)
    cal.add_argument("--jobs", type=int, default=1)
    cal.add_argument("-v", "--verbose", action="store_true")
    cal.set_defaults(func=_calibrate)

    val = sub.add_parser("validate-pattern", help="parse a pattern file and summarise it")
    val.add_argument("path")
    val.set_defaults(func=_validate_pattern)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
