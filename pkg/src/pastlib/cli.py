"""Command-line entry point.

Subcommands: ``run`` executes an experiment config and writes
results.csv / manifest.json (and optionally figure.svg); ``theory`` emits
complexity curves and critical radii; ``selftest`` runs the reduced
property suites.  Exit codes: 0 success, 2 config error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import sys

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="past",
        description="Semi-supervised surrogate-training experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", help="TOML experiment config file")
    run_p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    run_p.add_argument("--out", default="results", help="output directory")
    run_p.add_argument("--svg", action="store_true", help="also write figure.svg")

    th_p = sub.add_parser("theory", help="complexity curves and critical radii")
    th_p.add_argument("config", help="TOML config with a [theory] section")
    th_p.add_argument("--out", default="results", help="output directory")

    sub.add_parser("selftest", help="run reduced property suites")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    # Imports deferred so `--help` stays fast.
    from . import harness

    if args.command == "selftest":
        from .selfcheck import self_test

        return EXIT_OK if self_test() else EXIT_NUMERIC

    try:
        config = harness.load_config(args.config)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "theory":
            if config.kind != "theory":
                print("config error: expected kind = 'theory'", file=sys.stderr)
                return EXIT_CONFIG
            rows, fixed_points = harness.run_theory(config)
            harness.write_theory(rows, fixed_points, args.out)
            for n, r in sorted(fixed_points.items()):
                print(f"n={n}: critical radius {r:.6g}")
        else:
            if config.kind == "theory":
                print("config error: use the 'theory' subcommand", file=sys.stderr)
                return EXIT_CONFIG
            result = harness.run_experiment(config, jobs=args.jobs)
            harness.write_results(result, args.out, svg=args.svg, config=config)
            print(f"wrote {len(result.rows)} rows to {args.out}/results.csv")
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
