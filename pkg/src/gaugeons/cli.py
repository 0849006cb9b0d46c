"""Command line entry point: ``gaugeons run|validate <config>``."""
import argparse
import logging
import os
import sys

from . import harness


def _parser():
    p = argparse.ArgumentParser(prog="gaugeons", description="Projection-free OCO experiment runner")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--out", default=None, help=f"output directory (default ${harness.ENV_OUT} or .)")
    run.add_argument("--threads", type=int, default=None,
                     help=f"worker threads (default ${harness.ENV_THREADS} or 1)")
    run.add_argument("--format", choices=("csv", "json"), default="csv")
    run.add_argument("--timing", action="store_true",
                     help="fill the wall_ms column (makes the report nondeterministic)")
    run.add_argument("-v", "--verbose", action="store_true")
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        exps = harness.load_config(args.config)
    except harness.ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    if args.command == "validate":
        cells = sum(len(e["algorithms"]) * max(1, len(e["horizons"])) * len(e["seeds"]) for e in exps)
        print(f"ok: {len(exps)} experiment(s), {cells} run(s)")
        return 0
    if args.threads is not None and args.threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return 2
    name = os.path.splitext(os.path.basename(args.config))[0]
    try:
        report = harness.run_experiment(exps, threads=args.threads)
        paths = harness.emit(report, args.format, args.out, name, timing=args.timing)
    except Exception as exc:  # runtime fault
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
