"""Monte Carlo experiments: seeded trials, aggregation and result files.

Output directory layout of ``run_experiment``::

    config.json          validated configuration
    environment.json     the environment every trial ran on
    metadata.json        package version and series labels
    summary.csv          mean/std cumulative regret per checkpoint and series
    index_summary.csv    mean index error per (series, epoch, arm)
    trace_<series>.csv   per-trial regret rows at the checkpoints
    index_<series>.csv   per-trial index diagnostics
    smoothness.json      per-trial smoothness estimates (adaptive only)
"""

import copy
import json
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from matplotlib import pyplot as plt
from sklearn.utils import check_random_state
from tqdm import tqdm

from .bandit import run_single_index
from .baseline import run_smoothbandit
from .environment import EnvironmentSpec, generate_environment
from .estimation.mrc import MrcSearchConfig
from .estimation.sireg import fit_sireg
from .exceptions import ConfigError, InsufficientDataError, SibanditError
from .params import ALGORITHMS, validate_config
from .plotting import emit_plots, plot_index_error, plot_regret
from .smoothness import SmoothnessConfig, estimate_smoothness, run_adaptive
from .trace import (INDEX_COLUMNS, INDEX_SUMMARY_COLUMNS, SUMMARY_COLUMNS, TRACE_COLUMNS,
                    read_csv, write_csv)
from .version import __version__

logger = logging.getLogger(__name__)

STUDY_RANGES = {1.5: (0.9, 1.9), 2.5: (1.9, 2.9)}
# epoch constant of the study presets, four epochs at n = 12000 and beta = 1.5
STUDY_C_T = 0.05
STUDY_MRC = {"max_generations": 100, "restarts": 1, "subsample_cap": 2000}


def make_environment(config):
    env = config["environment"]
    if "generator" in env:
        return generate_environment(**env["generator"])
    return EnvironmentSpec.from_dict(env["spec"])


def series_label(beta):
    return "single_index(beta={:g})".format(beta)


def series_file(label):
    return re.sub(r"[^A-Za-z0-9.]+", "_", label).strip("_")


def run_trial(config, env, trial):
    """Run every series of ``config`` once with seed ``seed + trial``.
    Returns {series label: RegretTrace}."""
    seed = config["seed"] + trial
    n = config["horizon"]
    constants = config["constants"]
    algorithm = config["algorithm"]
    traces = {}
    if algorithm == "single_index":
        traces[algorithm] = run_single_index(env, n, constants, check_random_state(seed),
                                             trial=trial, seed=seed)
        for beta in constants["misspecified_betas"]:
            traces[series_label(beta)] = run_single_index(
                env, n, constants, check_random_state(seed), trial=trial, seed=seed, beta=beta)
    elif algorithm == "smooth_bandit":
        traces[algorithm] = run_smoothbandit(env, n, constants["beta"], constants["baseline"],
                                             check_random_state(seed), trial=trial)
    elif algorithm == "adaptive":
        traces[algorithm] = run_adaptive(env, n, constants, check_random_state(seed),
                                         trial=trial, seed=seed)
    else:
        raise ConfigError("must be one of " + ", ".join(ALGORITHMS), "algorithm")
    return traces


def checkpoints(n, stride):
    t = np.arange(1, n + 1)
    return t[(t % stride == 0) | (t == n)]


def summarize(traces, n, stride):
    """Mean and standard deviation (ddof 0) of the cumulative regret over the
    trials of every series, at the checkpoints."""
    ts = checkpoints(n, stride)
    frames = []
    for label, runs in traces.items():
        if len(ts) == 0:
            continue
        cum = np.vstack([run.cum_regret[ts - 1] for run in runs])
        frames.append(pd.DataFrame({
            "t": ts,
            "mean_cum_regret": cum.mean(axis=0),
            "std_cum_regret": cum.std(axis=0),
            "algorithm": label,
        }, columns=SUMMARY_COLUMNS))
    if not frames:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def summarize_index(traces):
    frames = []
    for label, runs in traces.items():
        rows = pd.concat([run.index_rows() for run in runs], ignore_index=True)
        if rows.empty:
            continue
        mean = (rows.groupby(["epoch", "arm"], sort=True)["index_error"].mean()
                .reset_index().rename(columns={"index_error": "mean_index_error"}))
        mean.insert(0, "algorithm", label)
        frames.append(mean[INDEX_SUMMARY_COLUMNS])
    if not frames:
        return pd.DataFrame(columns=INDEX_SUMMARY_COLUMNS)
    return pd.concat(frames, ignore_index=True)


@dataclass(eq=False)
class ExperimentResult:
    config: dict
    environment: EnvironmentSpec
    traces: Dict[str, List] = field(default_factory=dict)
    summary: pd.DataFrame = None
    index_summary: pd.DataFrame = None
    out: str = None

    def terminal_regret(self):
        """Mean cumulative regret at the last checkpoint, per series."""
        last = self.summary.groupby("algorithm", sort=False).tail(1)
        return dict(zip(last["algorithm"], last["mean_cum_regret"]))


def _dump_json(obj, path):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def write_results(result, out):
    config = result.config
    stride = config["checkpoint_stride"]
    try:
        os.makedirs(out, exist_ok=True)
        stored = copy.deepcopy(config)
        stored["output"] = str(stored["output"])
        _dump_json(stored, os.path.join(out, "config.json"))
        _dump_json(result.environment.to_dict(), os.path.join(out, "environment.json"))
        _dump_json({"version": __version__, "series": list(result.traces)},
                   os.path.join(out, "metadata.json"))
        write_csv(result.summary, os.path.join(out, "summary.csv"), "summary")
        write_csv(result.index_summary, os.path.join(out, "index_summary.csv"), "index_summary")
        for label, runs in result.traces.items():
            name = series_file(label)
            rows = pd.concat([run.rows(stride) for run in runs], ignore_index=True)
            write_csv(rows[TRACE_COLUMNS], os.path.join(out, "trace_{}.csv".format(name)),
                      "trace")
            index = pd.concat([run.index_rows() for run in runs], ignore_index=True)
            write_csv(index[INDEX_COLUMNS], os.path.join(out, "index_{}.csv".format(name)),
                      "index")
        if config["algorithm"] == "adaptive":
            _dump_json([run.smoothness for run in result.traces["adaptive"]],
                       os.path.join(out, "smoothness.json"))
    except OSError as err:
        raise SibanditError("cannot write results to {} ({})".format(out, err))


def run_experiment(config, out=None):
    """Run ``trials`` seeded replicates of the configured algorithm, aggregate
    them and, unless ``out`` is False, write the result files.

    Parameters
    ----------
    config : dict
        Experiment configuration, validated here.
    out : str, optional
        Output directory, ``config["output"]`` by default. False skips writing.

    Returns
    -------
    ExperimentResult
    """
    config = validate_config(config)
    env = make_environment(config)
    if out is None:
        out = config["output"]
    trials = range(config["trials"])
    if config["verbose"]:
        trials = tqdm(trials, desc="trials")
    logger.info("running %d trial(s) of %s, horizon %d", config["trials"],
                config["algorithm"], config["horizon"])
    per_trial = Parallel(n_jobs=config["n_jobs"])(
        delayed(run_trial)(config, env, trial) for trial in trials)

    traces = {label: [runs[label] for runs in per_trial] for label in per_trial[0]}
    result = ExperimentResult(
        config=config,
        environment=env,
        traces=traces,
        summary=summarize(traces, config["horizon"], config["checkpoint_stride"]),
        index_summary=summarize_index(traces),
        out=str(out) if out is not False else None,
    )
    if out is not False:
        write_results(result, out)
    return result


def simulation_preset(beta=1.5, algorithm="single_index", trials=10, horizon=12000, seed=0,
                      misspecified=False):
    """Configuration of the simulation study: d = 4, K = 3, Gaussian noise of
    variance 0.1 and the study links with smoothness ``beta``."""
    if beta not in STUDY_RANGES:
        raise ConfigError("the study presets exist for beta in {}".format(sorted(STUDY_RANGES)),
                          "beta")
    constants = {"C_T": STUDY_C_T, "mrc": dict(STUDY_MRC)}
    if algorithm == "adaptive":
        beta_lo, beta_hi = STUDY_RANGES[beta]
        if beta_lo >= 1:
            raise ConfigError("the adaptive algorithm needs beta_lo < 1, the beta={} study "
                              "uses beta_lo={}".format(beta, beta_lo), "beta")
        constants.update(beta_lo=beta_lo, beta_hi=beta_hi)
    else:
        constants["beta"] = beta
    if misspecified:
        if algorithm != "single_index":
            raise ConfigError("misspecified levels only apply to single_index", "algorithm")
        constants["misspecified_betas"] = [round(beta + delta, 6)
                                           for delta in (-0.2, -0.1, 0.1, 0.2)]
    return validate_config({
        "seed": seed,
        "trials": trials,
        "horizon": horizon,
        "algorithm": algorithm,
        "environment": {"generator": {"d": 4, "K": 3, "beta": beta}},
        "constants": constants,
        "output": "sibandit_{}_beta{:g}".format(algorithm, beta),
    })


def run_regression(X, y, beta, out=None, C_H=1.0, seed=0, cross_fit=False, mrc=None,
                   direction="increasing", grid_points=201):
    """Fit a single-index regression offline and optionally write the index,
    the link on a grid over the evaluable region and the fit diagnostics."""
    config = MrcSearchConfig.from_params(mrc) if mrc else MrcSearchConfig()
    est = fit_sireg(X, y, beta, C_H=C_H, seed=seed, cross_fit=cross_fit, mrc_config=config,
                    direction=direction)
    lo, hi = est.evaluable_region
    grid = np.linspace(lo, hi, grid_points)
    values, degrees, expanded, in_domain = est.link.evaluate_many(grid)
    link = pd.DataFrame({"z": grid, "value": values, "degree": degrees,
                         "expanded": expanded, "in_domain": in_domain})
    diagnostics = {
        "n": int(est.n_samples),
        "d": int(np.shape(X)[1]),
        "beta": beta,
        "degree": int(est.link.degree),
        "bandwidth": est.link.bandwidth,
        "objective": est.index.objective_value,
        "direction": est.index.direction,
        "region": [lo, hi],
        "cross_fit": cross_fit,
        "version": __version__,
    }
    if out is not None:
        try:
            os.makedirs(out, exist_ok=True)
            index = pd.DataFrame({"coordinate": np.arange(1, len(est.index.v) + 1),
                                  "value": est.index.v})
            write_csv(index, os.path.join(out, "index.csv"), "index_vector")
            write_csv(link, os.path.join(out, "link_grid.csv"), "link_grid")
            _dump_json(diagnostics, os.path.join(out, "diagnostics.json"))
        except OSError as err:
            raise SibanditError("cannot write results to {} ({})".format(out, err))
    return est, link, diagnostics


def run_smoothness(config, out=None):
    """Estimate the link smoothness of the configured environment on its own,
    with the exploration budget of the configured horizon."""
    config = validate_config(config)
    constants = config["constants"]
    if constants["beta_lo"] is None:
        raise ConfigError("smoothness estimation needs beta_lo and beta_hi", "constants.beta_lo")
    env = make_environment(config)
    n = config["horizon"]
    if n < 3:
        raise ConfigError("the horizon must be at least 3", "horizon")
    estimate = estimate_smoothness(env, n, SmoothnessConfig.from_constants(constants),
                                   random_state=config["seed"], seed=config["seed"],
                                   n_jobs=config["n_jobs"])
    if out is not None:
        try:
            os.makedirs(out, exist_ok=True)
            _dump_json(estimate.to_dict(), os.path.join(out, "smoothness.json"))
            write_csv(estimate.bins, os.path.join(out, "smoothness_bins.csv"),
                      "smoothness_bins")
        except OSError as err:
            raise SibanditError("cannot write results to {} ({})".format(out, err))
    return estimate


class ExperimentRunner(object):
    """
    This class provides a simple interface to the simulation study of the
    single-index bandit.

    Usage:
        1. Create an ExperimentRunner with a configuration dictionary, a JSON
        file name, or a preset from simulation_preset.
        2. Call Run, or LoadResults to read an earlier run.
        3. Plot with PlotRegret, PlotIndexError or PlotAll.

    Parameters
    ----------
    config : dict
        Experiment configuration; see sibandit.params.DEFAULT_CONFIG.
    out : str, optional
        Output directory, overriding the configuration.
    """

    def __init__(self, config, out=None):
        self.config = validate_config(config)
        self.out = out if out is not None else self.config["output"]
        self.result = None
        self.summary = None
        self.index_summary = None

    def Run(self):
        """
        Run all trials and write the result files.
        """
        self.result = run_experiment(self.config, self.out)
        self.summary = self.result.summary
        self.index_summary = self.result.index_summary
        print("Terminal mean regret:", ", ".join(
            "{} {:.4g}".format(k, v) for k, v in self.result.terminal_regret().items()))
        return self.result

    def LoadResults(self, out=None):
        """
        Read summary.csv and index_summary.csv of an earlier run.
        """
        out = out if out is not None else self.out
        self.summary = read_csv(os.path.join(out, "summary.csv"), "summary")
        self.index_summary = read_csv(os.path.join(out, "index_summary.csv"), "index_summary")
        print("Loaded", self.summary["algorithm"].nunique(), "series from", out)
        return self.summary

    def _require_summary(self):
        if self.summary is None:
            raise InsufficientDataError("no results, call Run or LoadResults first")

    def PlotRegret(self, ax=None, band=True):
        """
        Plot the mean cumulative regret of every series.

        Parameters
        ----------
        ax : matplotlib axis
            The axis to plot on
        band : bool
            Shade one standard deviation around the mean

        Returns
        -------
        ax : matplotlib axis
        """
        self._require_summary()
        if ax is None:
            ax = plt.gca()
        return plot_regret(self.summary, ax, band)

    def PlotIndexError(self, ax=None):
        """
        Plot the mean index error per epoch and arm.
        """
        self._require_summary()
        if ax is None:
            ax = plt.gca()
        return plot_index_error(self.index_summary, ax)

    def PlotAll(self, out=None):
        """
        Write the SVG figures next to the result files.
        """
        self._require_summary()
        return emit_plots(self.summary, out if out is not None else self.out,
                          self.index_summary)


def index_error_trend(index_summary, algorithm="single_index"):
    """Mean index error over arms per epoch for one series."""
    rows = index_summary[index_summary["algorithm"] == algorithm]
    return rows.groupby("epoch")["mean_index_error"].mean()


def epoch_regret_rates(trace):
    """Reg(S_m) / S_m at the end of every epoch of a trace."""
    return [trace.regret_at(end) / end for end in trace.epoch_ends if end > 0]