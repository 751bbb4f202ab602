"""Command-line front end.

Exit codes: 0 success, 1 failed check, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import kernels
from .errors import CapabilityError, ConfigError, ParameterDomainError, QsoptError
from .sweep import ALGORITHMS, ExperimentConfig, csv_text, json_text, run_sweep
from .verify import SUITES, run_suite

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _seed(text):
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _common(p):
    p.add_argument("--config", help="experiment file (INI format)")
    p.add_argument("--seed", type=_seed, help="64-bit base seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel cells")
    p.add_argument("--out", help="CSV output path; the JSON summary goes next to it")
    p.add_argument("--backend", choices=("contract", "sample"))
    p.add_argument("--cqme", type=float, help="constant in the mean-estimation cost")


def build_parser():
    parser = _Parser(prog="qsopt", description="Quantum stochastic optimisation simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for algo in ALGORITHMS:
        if algo == "sgd-baseline":
            continue
        p = sub.add_parser(algo, help=f"run {algo} over an epsilon grid")
        _common(p)
        p.add_argument("--fixture", help="fixture kind")
        p.add_argument("--d", type=int, nargs="+", help="dimensions")
        p.add_argument("--eps", type=float, nargs="+", help="epsilon grid (strictly decreasing)")
        p.add_argument("--trials", type=int, help="trials per cell")
    p = sub.add_parser("sweep", help="run the experiment in --config")
    _common(p)
    p = sub.add_parser("verify", help="run a statistical self-check")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--seed", type=_seed, default=0)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_file(args.config)
        if args.command != "sweep" and cfg.algorithm != args.command:
            raise ConfigError(f"config is for {cfg.algorithm}, not {args.command}")
    elif args.command == "sweep":
        raise ConfigError("sweep needs --config")
    else:
        cfg = ExperimentConfig(algorithm=args.command, fixture=args.fixture or "")
    if args.command != "sweep":
        if args.fixture:
            cfg.fixture = args.fixture
        if args.d:
            cfg.dims = args.d
        if args.eps:
            cfg.epsilons = args.eps
        if args.trials is not None:
            cfg.trials = args.trials
    if args.seed is not None:
        cfg.seed = args.seed
    if args.backend:
        cfg.backend = args.backend
    if args.cqme is not None:
        cfg.c_qme = args.cqme
    if args.out:
        cfg.csv_path = args.out
        stem = args.out[:-4] if args.out.endswith(".csv") else args.out
        cfg.json_path = stem + ".json"
    if args.jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify":
        checks = run_suite(args.suite, seed=args.seed)
        for c in checks:
            print(c.line())
        ok = all(c.passed for c in checks)
        print(f"suite {args.suite}: {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_CHECK
    try:
        cfg = _config_from_args(args)
        records, summary = run_sweep(cfg, jobs=args.jobs)
    except (ConfigError, ParameterDomainError, CapabilityError) as exc:
        print(f"qsopt: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QsoptError as exc:
        print(f"qsopt: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK
    if not cfg.csv_path:
        sys.stdout.write(csv_text(records))
    if not cfg.json_path:
        sys.stdout.write(json_text(summary))
    else:
        print(f"wrote {cfg.csv_path} and {cfg.json_path} (kernels: {kernels.BACKEND})", file=sys.stderr)
        print(json.dumps({"slope": summary["slope"], "predicted_exponent": summary["predicted_exponent"]}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
