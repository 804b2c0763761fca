"""Command-line entry point: ``betasphere <experiment> [options]``.

Exit codes: 0 success, 1 a check failed, 2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from .errors import InputError, NumericalError
from .experiments import Experiment, ExperimentConfig, run


def _int_list(text):
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _beta(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"beta must be a number or 'inf', got {text!r}")


def _auto_int(text):
    if text == "auto":
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or an integer, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="betasphere", description="Beta-ensemble experiments on the Riemann sphere.")
    p.add_argument("experiment", choices=[e.value for e in Experiment])
    p.add_argument("--k", type=_int_list, default=None, help="comma-separated k values")
    p.add_argument("--beta", type=_beta, default=2.0, help="positive number or 'inf'")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--ot", choices=("exact", "entropic", "auto"), default="auto")
    p.add_argument("--lattice-m", type=_auto_int, default=None, metavar="auto|N")
    p.add_argument("--sweeps", type=_auto_int, default=None, metavar="auto|N")
    p.add_argument("--out", default=None, metavar="PATH",
                   help="output base path; writes PATH.csv and PATH.json")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="fill the runtime_ms column")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    exp = Experiment(args.experiment)
    trials = args.trials
    if trials is None:
        trials = 200 if exp is Experiment.CONCENTRATION else 20
    try:
        config = ExperimentConfig(
            experiment=exp, k_values=args.k, beta=args.beta, trials=trials,
            lattice_M=args.lattice_m, ot_method=args.ot, seed=args.seed,
            mcmc_sweeps=args.sweeps, output_path=args.out, workers=args.workers,
            timing=args.timing, inject_fault=args.inject_fault,
        )
        report = run(config)
        csv_path, json_path = report.write(config)
    except InputError as exc:
        print(f"betasphere: input error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ArithmeticError) as exc:
        print(f"betasphere: numerical failure: {exc}", file=sys.stderr)
        return 3
    print(json.dumps({"experiment": exp.value, "checks": report.checks,
                      "passed": report.passed, "csv": csv_path, "json": json_path}, indent=2))
    return 0 if report.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
