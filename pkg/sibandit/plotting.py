import logging
import os

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .trace import INDEX_SUMMARY_COLUMNS, SUMMARY_COLUMNS

logger = logging.getLogger(__name__)


def _check_columns(df, columns, name):
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ValueError("{} is missing columns {}".format(name, missing))


def plot_regret(summary, ax, band=True):
    """Mean cumulative regret against t, one line per algorithm, with a
    one standard deviation band."""
    _check_columns(summary, SUMMARY_COLUMNS, "summary")
    for label, series in summary.groupby("algorithm", sort=False):
        t = series["t"].to_numpy()
        mean = series["mean_cum_regret"].to_numpy()
        std = series["std_cum_regret"].to_numpy()
        line, = ax.plot(t, mean, label=label)
        if band:
            ax.fill_between(t, mean - std, mean + std, color=line.get_color(), alpha=0.2,
                            linewidth=0)
    ax.set_xlabel("t")
    ax.set_ylabel("cumulative regret")
    if summary["algorithm"].nunique() > 1:
        ax.legend(loc="upper left")
    return ax


def plot_index_error(index_summary, ax):
    """Mean index error against the epoch, one line per (algorithm, arm)."""
    _check_columns(index_summary, INDEX_SUMMARY_COLUMNS, "index summary")
    for (label, arm), series in index_summary.groupby(["algorithm", "arm"], sort=False):
        series = series.sort_values("epoch")
        ax.plot(series["epoch"], series["mean_index_error"], marker="o",
                label="{} arm {}".format(label, arm))
    ax.set_xlabel("epoch")
    ax.set_ylabel("index error")
    if len(index_summary):
        ax.legend(loc="upper right")
        ax.set_xticks(np.unique(index_summary["epoch"]))
    return ax


def _save(fig, path):
    with matplotlib.rc_context({"svg.hashsalt": "sibandit", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def emit_plots(summary, out, index_summary=None):
    """Write regret.svg, and index_error.svg when an index summary with rows
    is given, to the directory ``out``. Returns the written paths."""
    _check_columns(summary, SUMMARY_COLUMNS, "summary")
    os.makedirs(out, exist_ok=True)
    written = []

    fig = Figure(figsize=(6, 4))
    plot_regret(summary, fig.add_subplot(1, 1, 1))
    fig.tight_layout()
    path = os.path.join(out, "regret.svg")
    _save(fig, path)
    written.append(path)

    if index_summary is not None and len(index_summary):
        fig = Figure(figsize=(6, 4))
        plot_index_error(index_summary, fig.add_subplot(1, 1, 1))
        fig.tight_layout()
        path = os.path.join(out, "index_error.svg")
        _save(fig, path)
        written.append(path)
    logger.info("wrote %s", ", ".join(written))
    return written
