# Regenerate the simulation study
# runs every preset, writes the result files and the SVG figures

import argparse
import logging
import os
import sys

# import locally (works without install)
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))

import pandas as pd

from sibandit.harness import run_experiment, simulation_preset
from sibandit.plotting import emit_plots
from sibandit.trace import write_csv

RUNS = [
    # (beta, algorithm, misspecified)
    (1.5, "single_index", True),
    (1.5, "smooth_bandit", False),
    (1.5, "adaptive", False),
    (2.5, "single_index", False),
    (2.5, "smooth_bandit", False),
]


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description="Run the single-index bandit simulation study.")
    parser.add_argument("--out", default="simulation_study", help="output directory")
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--horizon", type=int, default=12000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1, help="parallel trials")
    parser.add_argument("--beta", type=float, choices=(1.5, 2.5),
                        help="only run the setting with this smoothness")
    return parser.parse_args(argv)


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")

    summaries = {}
    index_summaries = {}
    for beta, algorithm, misspecified in RUNS:
        if args.beta is not None and beta != args.beta:
            continue
        config = simulation_preset(beta, algorithm, trials=args.trials, horizon=args.horizon,
                                   seed=args.seed, misspecified=misspecified)
        config["n_jobs"] = args.threads
        config["verbose"] = True
        out = os.path.join(args.out, "{}_beta{:g}".format(algorithm, beta))
        print("running", algorithm, "beta", beta, "->", out)
        result = run_experiment(config, out)
        emit_plots(result.summary, out, result.index_summary)
        summaries.setdefault(beta, []).append(result.summary)
        index_summaries.setdefault(beta, []).append(result.index_summary)

    # one regret figure per setting with every algorithm on it
    for beta, frames in summaries.items():
        out = os.path.join(args.out, "beta{:g}".format(beta))
        os.makedirs(out, exist_ok=True)
        summary = pd.concat(frames, ignore_index=True)
        index_summary = pd.concat(index_summaries[beta], ignore_index=True)
        write_csv(summary, os.path.join(out, "summary.csv"), "summary")
        write_csv(index_summary, os.path.join(out, "index_summary.csv"), "index_summary")
        for path in emit_plots(summary, out, index_summary):
            print("wrote", path)


if __name__ == "__main__":
    main()
