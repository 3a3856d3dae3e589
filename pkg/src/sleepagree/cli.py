"""Command-line entry point: ``sleepagree {run,sweep,check,trace}``.

Exit codes: 0 all checks pass, 1 a property check failed, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .errors import ConfigInvalid, ProtocolStuck
from .protocols import PROTOCOL_NAMES

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file mirroring RunConfig; flags override it")
    p.add_argument("--protocol", choices=PROTOCOL_NAMES)
    p.add_argument("--n", type=int)
    p.add_argument("--f", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--inputs", help="unanimous:v | random:seed[:k] | comma-separated values")
    p.add_argument("--adversary", help="inline JSON, @file, or 'none'")
    p.add_argument("--seed", type=int)
    p.add_argument("--thresholds", choices=("paper", "strict"))
    p.add_argument("--base-variant", choices=("min", "max"))
    p.add_argument("--one-preference", action="store_true", default=None)
    p.add_argument("--out", help="output file (default: standard output)")


def _run_config(args) -> harness.RunConfig:
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    overrides = {
        "protocol": args.protocol, "n": args.n, "f": args.f, "c": args.c, "inputs": args.inputs,
        "seed": args.seed, "thresholds": args.thresholds, "base_variant": args.base_variant,
        "one_preference": args.one_preference,
    }
    if args.adversary is not None:
        overrides["adversary"] = harness.load_adversary(args.adversary).to_json()
    base.update({k: v for k, v in overrides.items() if v is not None})
    if "protocol" not in base or "n" not in base:
        raise ConfigInvalid("--protocol and --n are required (directly or via --config)")
    return harness.RunConfig.from_json(base)


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    outcome = harness.execute(_run_config(args))
    _emit(json.dumps(outcome.to_json(), indent=2, sort_keys=True) + "\n", args.out)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write("\n".join(harness.trace_lines(outcome)) + "\n")
    return EXIT_OK if outcome.ok else EXIT_FAIL


def cmd_trace(args) -> int:
    outcome = harness.execute(_run_config(args))
    _emit("\n".join(harness.trace_lines(outcome)) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.config:
        with open(args.config) as fh:
            sc = harness.SweepConfig(**json.load(fh))
    else:
        if not args.protocol or not args.n:
            raise ConfigInvalid("--protocol and --n are required")
        sc = harness.SweepConfig(
            protocol=args.protocol, ns=_int_list(args.n),
            fs=_int_list(args.f) if args.f else None, adversary=args.adversary,
            trials=args.trials, seed=args.seed, c=args.c, thresholds=args.thresholds, jobs=args.jobs,
        )
    _emit(harness.rows_to_csv(harness.sweep(sc)), args.out)
    return EXIT_OK


def cmd_check(args) -> int:
    if args.suite == "small-exhaustive":
        report = harness.check_small_exhaustive(seed=args.seed)
    elif args.suite == "randomized":
        cells = None
        if args.protocol:
            if not args.n:
                raise ConfigInvalid("--n is required with --protocol")
            cfg = harness.RunConfig(args.protocol, args.n, f=args.f, thresholds=args.thresholds).protocol_config()
            cells = [(cfg, args.n, args.adversary)]
        report = harness.check_randomized(args.seed, args.trials, cells)
    else:
        report = harness.check_scripted_attacks()
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK if report["ok"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sleepagree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one execution and check its properties")
    _add_run_flags(run)
    run.add_argument("--trace", help="also write the line-delimited JSON event log here")
    run.set_defaults(func=cmd_run)

    trace = sub.add_parser("trace", help="run one execution and print its event log")
    _add_run_flags(trace)
    trace.set_defaults(func=cmd_trace)

    sweep = sub.add_parser("sweep", help="parameter sweep, CSV output")
    sweep.add_argument("--config", help="JSON file mirroring SweepConfig")
    sweep.add_argument("--protocol", choices=PROTOCOL_NAMES)
    sweep.add_argument("--n", help="comma-separated list of n")
    sweep.add_argument("--f", help="comma-separated list of f (default: largest legal f per n)")
    sweep.add_argument("--c", type=int, default=2)
    sweep.add_argument("--adversary", default="none",
                       help="none | random-crash[:k] | random-strategy | built-in strategy name")
    sweep.add_argument("--trials", type=int, default=1)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--thresholds", choices=("paper", "strict"), default="paper")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--out")
    sweep.set_defaults(func=cmd_sweep)

    check = sub.add_parser("check", help="verification suites, JSON report")
    check.add_argument("suite", choices=("small-exhaustive", "randomized", "scripted-attacks"))
    check.add_argument("--seed", type=int, default=1)
    check.add_argument("--trials", type=int, default=1000)
    check.add_argument("--protocol", choices=PROTOCOL_NAMES, help="randomized suite: single cell")
    check.add_argument("--n", type=int)
    check.add_argument("--f", type=int)
    check.add_argument("--thresholds", choices=("paper", "strict"), default="strict")
    check.add_argument("--adversary", default="random-crash")
    check.add_argument("--out")
    check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigInvalid, ProtocolStuck, OSError, json.JSONDecodeError, TypeError) as exc:
        print(f"sleepagree: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
