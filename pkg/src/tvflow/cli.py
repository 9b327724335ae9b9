"""Command line entry point: ``tvflow run <config>``, ``tvflow list``, ``tvflow verify``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import OUTPUT_ENV, load_config
from .errors import TVFlowError
from .experiments import SCENARIOS, defaults_for, run_config, run_scenario


def _report(outcome, stream):
    for a in outcome.assertions + outcome.timings:
        print(f"  {a.line()}", file=stream)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, _defaults_or_none)
        if cfg.scenario not in SCENARIOS:
            print(f"error: {cfg.source}: unknown scenario {cfg.scenario!r} (see `tvflow list`)", file=sys.stderr)
            return 2
        outcome = run_config(cfg, tier=args.tier)
    except TVFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{cfg.scenario}: {'PASS' if outcome.passed else 'FAIL'} ({outcome.outdir})")
    _report(outcome, sys.stdout)
    return 0 if outcome.passed else 1


def _defaults_or_none(name):
    try:
        return defaults_for(name)
    except KeyError:
        return {}


def cmd_list(args) -> int:
    width = max(len(n) for n in SCENARIOS)
    for name, sc in SCENARIOS.items():
        tag = f"[{sc.criterion:>2}]" if sc.criterion else "[--]"
        print(f"{tag} {name:<{width}}  {sc.description}  (basis: {sc.basis})")
    return 0


def cmd_verify(args) -> int:
    root = Path(os.environ.get(OUTPUT_ENV) or args.out)
    names = args.only or [n for n, sc in SCENARIOS.items() if sc.criterion is not None]
    failed = []
    for name in names:
        if name not in SCENARIOS:
            print(f"error: unknown scenario {name!r}", file=sys.stderr)
            return 2
        try:
            outcome = run_scenario(name, seed=args.seed, outdir=root / name, tier=args.tier)
        except TVFlowError as exc:
            print(f"{name}: ERROR {exc}")
            failed.append(name)
            continue
        print(f"{name}: {'PASS' if outcome.passed else 'FAIL'}")
        _report(outcome, sys.stdout)
        if not outcome.passed:
            failed.append(name)
    print(f"{len(names) - len(failed)}/{len(names)} scenarios passed")
    return 0 if not failed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tvflow", description="Total variation flow experiments on the periodic torus.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--tier", choices=("quick", "full"), default="full", help="defaults used for keys the config leaves out")
    p_run.set_defaults(func=cmd_run)

    p_list = sub.add_parser("list", help="list scenarios")
    p_list.set_defaults(func=cmd_list)

    p_verify = sub.add_parser("verify", help="run the acceptance battery")
    p_verify.add_argument("--tier", choices=("quick", "full"), default="quick")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", default="tvflow-out", help=f"output root (overridden by ${OUTPUT_ENV})")
    p_verify.add_argument("--only", nargs="+", metavar="SCENARIO", help="run a subset")
    p_verify.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
