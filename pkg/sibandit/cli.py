"""Command line entry point ``sibandit``.

    sibandit simulate --config <path> [--trials N] [--seed S] [--threads T] [--out DIR]
    sibandit regress --data <csv> --beta B --out DIR
    sibandit smoothness --config <path> --out DIR
    sibandit plot --summary <csv> --out DIR

Exit code 0 on success, 2 on a configuration error, 3 on any other error.
"""

import argparse
import logging
import os
import sys

import pandas as pd

from .exceptions import ConfigError
from .harness import run_experiment, run_regression, run_smoothness
from .params import load_config, read_config_document, validate_config
from .plotting import emit_plots
from .trace import read_csv
from .version import __version__

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sibandit",
        description="Single-index contextual bandit simulator.")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log at debug level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("--config", required=True, help="JSON experiment configuration")
    p.add_argument("--trials", type=int, help="override the number of trials")
    p.add_argument("--seed", type=int, help="override the base seed")
    p.add_argument("--threads", type=int, help="parallel trials")
    p.add_argument("--out", help="output directory")

    p = sub.add_parser("regress", help="offline single-index regression of a CSV")
    p.add_argument("--data", required=True,
                   help="CSV with a header, covariate columns x1..xd and the response last")
    p.add_argument("--beta", type=float, required=True, help="link smoothness")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--C-H", dest="C_H", type=float, default=1.0, help="bandwidth constant")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cross-fit", action="store_true")
    p.add_argument("--direction", choices=("increasing", "decreasing", "auto"),
                   default="increasing")

    p = sub.add_parser("smoothness",
                       help="estimate the link smoothness of a configured environment; the "
                            "config needs algorithm \"adaptive\" with beta_lo and beta_hi")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("plot", help="render SVG figures from a summary.csv")
    p.add_argument("--summary", required=True)
    p.add_argument("--index-summary", help="index_summary.csv, next to the summary by default")
    p.add_argument("--out", required=True)
    return parser


def simulate(args):
    document = read_config_document(args.config)
    overrides = {"trials": args.trials, "seed": args.seed, "n_jobs": args.threads,
                 "output": args.out}
    if isinstance(document, dict):
        document.update({k: v for k, v in overrides.items() if v is not None})
    config = validate_config(document)
    result = run_experiment(config)
    for label, regret in result.terminal_regret().items():
        print("{}: terminal mean regret {:.6g}".format(label, regret))
    print("results written to", result.out)


def regress(args):
    try:
        data = pd.read_csv(args.data)
    except (OSError, ValueError) as err:
        raise ConfigError("cannot read {} ({})".format(args.data, err), "data")
    if data.shape[1] < 3:
        raise ConfigError("need at least two covariate columns and a response", "data")
    X = data.iloc[:, :-1].to_numpy(dtype=float)
    y = data.iloc[:, -1].to_numpy(dtype=float)
    est, _, diagnostics = run_regression(X, y, args.beta, out=args.out, C_H=args.C_H,
                                         seed=args.seed, cross_fit=args.cross_fit,
                                         direction=args.direction)
    print("index:", " ".join("{:.6g}".format(v) for v in est.index.v))
    print("objective {:.6g}, bandwidth {:.4g}".format(diagnostics["objective"],
                                                      diagnostics["bandwidth"]))


def smoothness(args):
    config = load_config(args.config)
    estimate = run_smoothness(config, out=args.out)
    print("beta_est {:.4g} (b_max {:.4g}, l1={}, l2={}, l3={}, N0={})".format(
        estimate.beta_est, estimate.b_max, estimate.l1, estimate.l2, estimate.l3, estimate.N0))


def plot(args):
    summary = read_csv(args.summary, "summary")
    index_path = args.index_summary or os.path.join(os.path.dirname(args.summary),
                                                    "index_summary.csv")
    index_summary = None
    if os.path.exists(index_path):
        index_summary = read_csv(index_path, "index_summary")
    for path in emit_plots(summary, args.out, index_summary):
        print("wrote", path)


COMMANDS = {"simulate": simulate, "regress": regress, "smoothness": smoothness, "plot": plot}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConfigError as err:
        logger.error("configuration error: %s", err)
        return EXIT_CONFIG
    except Exception as err:
        logger.error("%s: %s", type(err).__name__, err)
        logger.debug("traceback", exc_info=True)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
