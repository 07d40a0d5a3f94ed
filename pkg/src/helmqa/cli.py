"""Command-line entry point: ``helmqa <experiment> --config C --out DIR --seed S``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import sys

from . import bench
from .errors import ConfigError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="helmqa", description="Annealing eigensolver experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "homogeneous": "eigenmodes with deflation, one trace per mode",
        "helmholtz": "forced response; sweeps D to find D*",
        "ice-sweep": "residual drop versus control-error magnitude",
        "cond-table": "condition numbers of the normal-equation matrix",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="JSON config (optional for cond-table)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config is None:
            if args.command != "cond-table":
                raise ConfigError(f"{args.command} needs --config")
            cfg = bench.ExperimentConfig.from_dict({}, experiment="cond-table")
        else:
            cfg = bench.ExperimentConfig.load(args.config, experiment=args.command)
        if args.seed is not None:
            cfg.seed = args.seed
        summary = bench.run(cfg, args.out)
    except NumericalError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for row in summary.rows:
        print(",".join(bench._fmt(row.get(c)) for c in bench.SUMMARY_COLUMNS))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
