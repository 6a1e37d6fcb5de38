"""Command-line entry point: ``sim run <scenario>`` and ``sim check``."""

from __future__ import annotations

import argparse
import sys

from .config import OUTPUT_DIR_ENV, SCENARIOS, ConfigError, ScenarioConfig, parse_assignments, read_config_file


def _parser():
    parser = argparse.ArgumentParser(prog="sim", description="Heralded atom-photon entanglement simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write its CSV output")
    run.add_argument("scenario", help="one of: " + ", ".join(SCENARIOS))
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--trials", type=int, default=None, help="trials per sweep point (scenario default if omitted)")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="parameter override such as source.eta_q=0.5; repeatable")
    run.add_argument("--config", default=None, help="file of KEY=VALUE lines applied before --set")
    run.add_argument("--out", default=None,
                     help=f"output base directory (default: ${OUTPUT_DIR_ENV} or ./sim-output)")
    run.add_argument("--workers", type=int, default=1, help="worker processes for sweep points")

    check = sub.add_parser("check", help="run the acceptance suite and print the PASS/FAIL table")
    check.add_argument("--seed", type=int, default=0)
    return parser


def _run(args):
    from .scenarios import run_scenario

    overrides = read_config_file(args.config) if args.config else {}
    overrides.update(parse_assignments(args.overrides))
    cfg = ScenarioConfig(args.scenario, seed=args.seed, trials=args.trials, overrides=overrides,
                         output_dir=args.out, workers=args.workers)
    result = run_scenario(cfg)
    print(result.summary())
    print(f"wrote {len(result.files)} files to {cfg.out}")
    return 0 if result.passed else 1


def _check(args):
    from .acceptance import format_table, run_acceptance

    results = run_acceptance(seed=args.seed)
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return _run(args) if args.command == "run" else _check(args)
    except (ConfigError, OSError) as exc:
        print(f"sim: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
