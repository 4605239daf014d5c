"""Command line driver.

    bvlab solve <config> [--output DIR] [--workers N]
    bvlab analyze <artifact_dir>
    bvlab plotdata <artifact_dir>
    bvlab selftest

Exit codes: 0 ok, 1 configuration or input error, 2 solver error.
The worker count for the eps sweep defaults to ``$BVLAB_WORKERS`` (1).
"""
from __future__ import annotations

import argparse
import logging
import sys

from .experiment import ConfigError, analyze_artifacts, emit_plotdata, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2

log = logging.getLogger("bvlab")


def _parser():
    p = argparse.ArgumentParser(prog="bvlab", description="Vanishing-viscosity experiments for rate-independent systems.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="run the eps sweep of a YAML config and analyse it")
    s.add_argument("config")
    s.add_argument("--output", default=None, help="override the config's output directory")
    s.add_argument("--workers", type=int, default=None)
    a = sub.add_parser("analyze", help="recompute curves, regimes and jump reports from stored trajectories")
    a.add_argument("artifact_dir")
    d = sub.add_parser("plotdata", help="write long-format series,x,y files")
    d.add_argument("artifact_dir")
    sub.add_parser("selftest", help="run the built-in property checks")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "solve":
            out = run_experiment(args.config, output=args.output, workers=args.workers)
            print(out)
        elif args.command == "analyze":
            print(analyze_artifacts(args.artifact_dir))
        elif args.command == "plotdata":
            missing = emit_plotdata(args.artifact_dir)
            if missing:
                print("missing inputs:", file=sys.stderr)
                for m in missing:
                    print(f"  {m}", file=sys.stderr)
                return EXIT_CONFIG
        elif args.command == "selftest":
            from .selftest import run_selftest
            return EXIT_OK if run_selftest() else EXIT_SOLVER
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
