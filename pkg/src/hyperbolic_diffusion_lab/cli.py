# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""
hyperdiff-lab

Command-line runner for the hyperbolic-diffusion experiments. Each
subcommand loads a YAML experiment file, runs it, and writes its result
files next to a run manifest. Without an output path the summary is printed
to stdout as JSON.

Exit status: 0 when every check passed, 1 on a numerical error or a failed
check, 2 on an invalid configuration or command line.
"""

import argparse
import json
import logging
import sys
import time

from . import __version__
from .config import Experiment, load_config
from .errors import ConfigError, LabError, SchemaMismatchError
from .experiments import run
from .results import compare, to_jsonable, write_manifest, write_result

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


def _add_common(parser):
    parser.add_argument("-c", "--config", required=True, help="Path to the YAML experiment file.")
    parser.add_argument("--out", default=None, help="Result file path (overrides output.path).")
    parser.add_argument("--seed", type=int, default=None, help="Random seed (overrides seed).")
    parser.add_argument("--format", choices=["csv", "summary"], default=None,
                        help="Result format (overrides output.format).")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hyperdiff-lab",
        description="Numerical laboratory for hyperbolic diffusion and its Black-Scholes and Cauchy limits.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING", choices=LOG_LEVELS,
                        help="Set the logging level for stderr output.")
    parser.add_argument("--log-file", help="Redirect logging output to a file instead of stderr.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        Experiment.EVOLVE: "March the telegraph equation and record density snapshots.",
        Experiment.KG_CHECK: "Check pseudo-Hermiticity, spectrum and metric conservation.",
        Experiment.MC: "Cross-check the finite-difference solver against persistent random walkers.",
        Experiment.RESIDUAL_SCAN: "Fit the large-lambda Cauchy residual against lambda.",
        Experiment.LIMITS: "Verify the small-lambda Black-Scholes limit.",
        Experiment.MARTINGALE: "Measure the Martingale defect of a density.",
    }
    for experiment, text in helps.items():
        _add_common(sub.add_parser(experiment.value, help=text, description=text))
    cmp = sub.add_parser("compare", help="Compare two result files within a tolerance.")
    cmp.add_argument("file_a")
    cmp.add_argument("file_b")
    cmp.add_argument("--tolerance", type=float, default=1e-12,
                     help="Largest accepted L1 distance (series) or absolute difference.")
    return parser


def run_experiment(args):
    config = load_config(args.config, args.command)
    config = config.with_overrides(seed=args.seed, out=args.out, fmt=args.format)
    start = time.monotonic()
    result = run(config)
    wall_time = time.monotonic() - start
    if config.output.path:
        written = write_result(result, config, config.output.path)
        write_manifest(config.output.path, config, __version__, wall_time, written,
                       result.passed, result.failures)
    else:
        json.dump(to_jsonable(result.summary), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    for failure in result.failures:
        print(f"FAILED: {failure}", file=sys.stderr)
    return 0 if result.passed else 1


def run_compare(args):
    outcome = compare(args.file_a, args.file_b, args.tolerance)
    json.dump(outcome.as_dict(), sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    if not outcome.passed:
        print(f"FAILED: {outcome.metric} distance {outcome.distance:.6g} exceeds "
              f"tolerance {outcome.tolerance:g} {outcome.detail}".rstrip(), file=sys.stderr)
    return 0 if outcome.passed else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    log_kwargs = {
        "level": args.log_level.upper(),
        "format": "%(asctime)s %(levelname)s:%(name)s:%(threadName)s:%(message)s",
    }
    if args.log_file:
        log_kwargs["filename"] = args.log_file
    else:
        log_kwargs["stream"] = sys.stderr
    logging.basicConfig(**log_kwargs)

    try:
        if args.command == "compare":
            status = run_compare(args)
        else:
            status = run_experiment(args)
    except ConfigError as e:
        logging.critical(f"Invalid configuration: {e}")
        print(f"FATAL: {e}", file=sys.stderr)
        sys.exit(2)
    except SchemaMismatchError as e:
        logging.critical(str(e))
        print(f"FAILED: {e}", file=sys.stderr)
        sys.exit(1)
    except (LabError, OSError) as e:
        logging.critical(f"{args.command} failed: {e}")
        print(f"FATAL: {type(e).__name__}: {e}", file=sys.stderr)
        sys.exit(1)
    sys.exit(status)


if __name__ == "__main__":
    main()
