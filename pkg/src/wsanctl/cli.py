"""Command line entry point: ``wsanctl run | sweep | report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config, preset_path
from .errors import ConfigurationError, WsanctlError
from .harness import rebuild_report, run_batch


def _config(path):
    # a bare preset name such as "interference" is accepted too
    try:
        return load_config(path)
    except ConfigurationError:
        if "/" not in path and not path.endswith(".cfg"):
            return load_config(preset_path(path))
        raise


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="wsanctl", description="Wireless control co-simulator")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="scenario .cfg file or preset name")
        sp.add_argument("--seed", type=_seed, default=None, help="first run seed (default: from config)")
        sp.add_argument("--runs", type=int, default=None, help="number of seeded runs")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        sp.add_argument("--plots", action="store_true", help="write a PNG per run")

    run = sub.add_parser("run", help="simulate one algorithm")
    common(run)
    run.add_argument("--algo", default=None, help="hc, pn or fixed:<k> (default: from config)")

    sweep = sub.add_parser("sweep", help="simulate several algorithms on paired seeds")
    common(sweep)
    sweep.add_argument("--algos", default="hc,pn,fixed:2,fixed:3,fixed:4",
                       help="comma-separated algorithm list")

    rep = sub.add_parser("report", help="rebuild summaries from run CSVs")
    rep.add_argument("--out", required=True, help="directory written by run or sweep")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "report":
            summary = rebuild_report(args.out)
        else:
            cfg = _config(args.config)
            if args.cmd == "run":
                algos = [args.algo] if args.algo else None
            else:
                algos = [a for a in args.algos.split(",") if a.strip()]
            summary, _ = run_batch(cfg, args.out, args.runs, args.seed, algos, args.jobs, args.plots)
    except WsanctlError as exc:
        print(f"wsanctl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    json.dump(summary["algos"], sys.stdout, indent=2, sort_keys=True, default=float)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
