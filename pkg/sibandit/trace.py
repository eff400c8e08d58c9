"""Regret traces and the versioned CSV files they are stored in."""

import re
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from .exceptions import SchemaVersionError

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.10g"

TRACE_COLUMNS = ["trial", "t", "arm", "inst_regret", "cum_regret"]
INDEX_COLUMNS = ["trial", "epoch", "arm", "index_error", "objective"]
SUMMARY_COLUMNS = ["t", "mean_cum_regret", "std_cum_regret", "algorithm"]
INDEX_SUMMARY_COLUMNS = ["algorithm", "epoch", "arm", "mean_index_error"]
BIN_COLUMNS = ["arm", "bin_lo", "bin_hi", "n_points", "n_grid", "n_skipped", "discrepancy"]

COLUMNS = {
    "trace": TRACE_COLUMNS,
    "index": INDEX_COLUMNS,
    "summary": SUMMARY_COLUMNS,
    "index_summary": INDEX_SUMMARY_COLUMNS,
    "smoothness_bins": BIN_COLUMNS,
    "index_vector": ["coordinate", "value"],
    "link_grid": ["z", "value", "degree", "expanded", "in_domain"],
}

_SCHEMA_LINE = re.compile(r"^# sibandit:(?P<kind>[a-z_]+):v(?P<version>\d+)\s*$")


@dataclass(eq=False)
class RegretTrace:
    """Per-step record of one run: the pulled arm and the oracle regret of
    every round, per-epoch index diagnostics and, for the adaptive policy,
    the smoothness estimate."""

    trial: int = 0
    arms: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    inst_regret: np.ndarray = field(default_factory=lambda: np.zeros(0))
    index_diagnostics: List[dict] = field(default_factory=list)
    epoch_ends: List[int] = field(default_factory=list)
    smoothness: Optional[dict] = None

    @property
    def n(self):
        return len(self.arms)

    @property
    def t(self):
        return np.arange(1, self.n + 1)

    @property
    def cum_regret(self):
        return np.cumsum(self.inst_regret)

    def extend(self, arms, inst_regret):
        arms = np.asarray(arms, dtype=np.int64).ravel()
        inst_regret = np.asarray(inst_regret, dtype=float).ravel()
        if len(arms) != len(inst_regret):
            raise ValueError("arms and regrets differ in length")
        self.arms = np.concatenate([self.arms, arms])
        self.inst_regret = np.concatenate([self.inst_regret, inst_regret])

    def add_index_diagnostic(self, epoch, arm, index_error, objective):
        self.index_diagnostics.append({"trial": self.trial, "epoch": int(epoch),
                                       "arm": int(arm), "index_error": float(index_error),
                                       "objective": float(objective)})

    def regret_at(self, t):
        """Cumulative regret after round t (0 for t = 0)."""
        if t <= 0:
            return 0.0
        return float(self.cum_regret[t - 1])

    def rows(self, stride=1):
        """Trace rows, keeping rounds with t % stride == 0 and the last one."""
        t = self.t
        keep = (t % stride == 0) | (t == self.n)
        return pd.DataFrame({
            "trial": np.full(keep.sum(), self.trial, dtype=np.int64),
            "t": t[keep],
            "arm": self.arms[keep],
            "inst_regret": self.inst_regret[keep],
            "cum_regret": self.cum_regret[keep],
        }, columns=TRACE_COLUMNS)

    def index_rows(self):
        return pd.DataFrame(self.index_diagnostics, columns=INDEX_COLUMNS)


def write_csv(df, path, kind):
    """Write ``df`` after the schema line of ``kind``."""
    columns = COLUMNS.get(kind)
    if columns is not None and list(df.columns) != columns:
        raise ValueError("{} table needs columns {}, got {}".format(kind, columns,
                                                                    list(df.columns)))
    with open(path, "w", newline="") as f:
        f.write("# sibandit:{}:v{}\n".format(kind, SCHEMA_VERSION))
        df.to_csv(f, index=False, float_format=FLOAT_FORMAT)


def read_csv(path, kind):
    """Read a table written by write_csv, rejecting other kinds and versions."""
    with open(path, "r") as f:
        match = _SCHEMA_LINE.match(f.readline())
        if match is None:
            raise SchemaVersionError("{}: missing sibandit schema line".format(path))
        if match.group("kind") != kind:
            raise SchemaVersionError("{}: expected a {} table, found {}".format(
                path, kind, match.group("kind")))
        if int(match.group("version")) != SCHEMA_VERSION:
            raise SchemaVersionError("{}: unsupported schema version v{}".format(
                path, match.group("version")))
    df = pd.read_csv(path, skiprows=1)
    columns = COLUMNS.get(kind)
    if columns is not None and list(df.columns) != columns:
        raise SchemaVersionError("{}: unexpected columns {}".format(path, list(df.columns)))
    return df
