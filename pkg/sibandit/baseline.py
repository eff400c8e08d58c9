"""SmoothBandit comparator: successive arm elimination on nested cubes.

The covariate bounding box is cut into 2^j cells per axis, with the cell
side shrinking with the epoch length. Each cube keeps its own set of active
arms, inherited from the cube that contained it in the previous epoch, and
eliminates arms whose mean reward in the cube falls clearly below the best
one.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
from sklearn.utils import check_random_state

from .bandit import MAX_EPOCHS, MIN_C_T, EpochSchedule, choose_uniform
from .environment import draw_rewards, sample_covariates
from .exceptions import ConfigError
from .params import DEFAULT_BASELINE_PARAMS, merge_params
from .trace import RegretTrace

logger = logging.getLogger(__name__)


def bin_epoch_length(m, d, beta, C_T, c_eps):
    """n_m = ceil(C_T (1 / eps_m^2)^((2 beta + d) / (2 beta)))."""
    eps = c_eps * 2.0 ** (-m)
    return int(math.ceil(C_T * (1.0 / eps ** 2) ** ((2.0 * beta + d) / (2.0 * beta))))


@dataclass(frozen=True, eq=False)
class BinSchedule(EpochSchedule):
    """Epoch schedule of the comparator; ``bandwidths[m - 1]`` is the cube
    side h_m = c_h n_m^(-1 / (2 beta + d))."""

    bandwidths: np.ndarray = None


def build_bin_schedule(n, d, beta, C_T=None, c_eps=0.5, c_h=1.0):
    if n < 1:
        raise ConfigError("the horizon must be at least 1", "horizon")
    if C_T is None:
        C_T = 1.0
        while C_T > MIN_C_T and bin_epoch_length(1, d, beta, C_T, c_eps) > n / 4.0:
            C_T /= 2.0
        C_T = max(C_T, MIN_C_T)
    lengths = []
    while sum(lengths) < n:
        if len(lengths) >= MAX_EPOCHS:
            raise ConfigError("schedule does not cover the horizon", "baseline.C_T")
        lengths.append(max(bin_epoch_length(len(lengths) + 1, d, beta, C_T, c_eps), 1))
    lengths = np.array(lengths, dtype=np.int64)
    eps = c_eps * 2.0 ** (-np.arange(len(lengths) + 1))
    bandwidths = c_h * lengths.astype(float) ** (-1.0 / (2.0 * beta + d))
    return BinSchedule(n, d, beta, C_T, c_eps, eps, lengths, np.cumsum(lengths), bandwidths)


@dataclass(eq=False)
class BinPolicy:
    """Nested cube partitions and the per-cube active arms of every epoch.

    ``cells[m - 1]`` is the number of cells per axis in epoch m, a power of
    two that never decreases, so every cube of epoch m lies in exactly one
    cube of each earlier epoch. ``active[m - 1]`` maps the cubes visited in
    epoch m to their active arms after its elimination step.
    """

    schedule: BinSchedule
    K: int
    low: np.ndarray
    high: np.ndarray
    c_conf: float = 2.0 * math.sqrt(2.0)
    cells: List[int] = field(default_factory=list)
    active: List[Dict[int, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        width = float(np.max(self.high - self.low))
        previous = 1
        for h in self.schedule.bandwidths:
            cells = max(previous, 1 << max(0, int(math.ceil(math.log2(width / h)))))
            self.cells.append(cells)
            previous = cells

    def cube_coordinates(self, X, m):
        cells = self.cells[m - 1]
        scaled = (np.atleast_2d(X) - self.low) / (self.high - self.low) * cells
        return np.clip(np.floor(scaled), 0, cells - 1).astype(np.int64)

    @staticmethod
    def flatten(coords, cells):
        return np.ravel_multi_index(coords.T, (cells,) * coords.shape[1])

    def cube_ids(self, X, m):
        """Id of the epoch-m cube holding each row of ``X``."""
        return self.flatten(self.cube_coordinates(X, m), self.cells[m - 1])

    def inherited(self, coords, m):
        """Active arms of the cube with coordinates ``coords`` at the start of
        epoch m: those of the nearest earlier epoch that visited an enclosing
        cube, or every arm."""
        for j in range(m - 1, 0, -1):
            ratio = self.cells[m - 1] // self.cells[j - 1]
            parent = int(self.flatten((coords // ratio)[None, :], self.cells[j - 1])[0])
            if parent in self.active[j - 1]:
                return self.active[j - 1][parent].copy()
        return np.ones(self.K, dtype=bool)

    def eliminate(self, mask, sums, counts, n):
        played = mask & (counts > 0)
        if not played.any():
            return mask
        means = np.where(played, sums / np.maximum(counts, 1), -np.inf)
        best = means.max()
        width = self.c_conf * np.sqrt(math.log(max(n, 2)) * self.K / np.maximum(counts, 1))
        return mask & ~(played & (best - means > width))


def run_smoothbandit(env, n, beta, params=None, random_state=None, trial=0):
    """Run the cube-elimination comparator for ``n`` rounds.

    Parameters
    ----------
    env : EnvironmentSpec
    n : int
        Horizon.
    beta : float
        Smoothness used for the schedule and the cube sides.
    params : dict, optional
        Comparator constants (C_T, c_eps, c_h, c_conf), merged over
        DEFAULT_BASELINE_PARAMS.
    random_state : int, RandomState instance or None
    trial : int

    Returns
    -------
    RegretTrace
    """
    rng = check_random_state(random_state)
    params = merge_params(DEFAULT_BASELINE_PARAMS, params, "constants.baseline")
    trace = RegretTrace(trial=trial)
    if n == 0:
        return trace
    schedule = build_bin_schedule(n, env.d, beta, params["C_T"], params["c_eps"], params["c_h"])
    low, high = env.covariate_law.bounding_box()
    policy = BinPolicy(schedule, env.K, low, high, params["c_conf"])
    logger.info("smooth bandit: n=%d, M=%d epochs, cells per axis %s", n, schedule.M,
                policy.cells)

    for m in range(1, schedule.M + 1):
        start, end = schedule.bounds(m)
        X = sample_covariates(env.covariate_law, end - start, rng)
        coords = policy.cube_coordinates(X, m)
        ids = policy.flatten(coords, policy.cells[m - 1])
        cubes, first, inverse = np.unique(ids, return_index=True, return_inverse=True)
        start_masks = np.array([policy.inherited(coords[i], m) for i in first])
        if len(cubes) == 0:
            start_masks = np.ones((0, env.K), dtype=bool)

        arms = choose_uniform(start_masks[inverse], rng)
        y = draw_rewards(env, arms, X, rng)
        trace.extend(arms, env.regret(X, arms))

        flat = inverse * env.K + arms
        size = len(cubes) * env.K
        sums = np.bincount(flat, weights=y, minlength=size).reshape(-1, env.K)
        counts = np.bincount(flat, minlength=size).reshape(-1, env.K)
        policy.active.append({
            int(cube): policy.eliminate(start_masks[c], sums[c], counts[c], n)
            for c, cube in enumerate(cubes)
        })
        trace.epoch_ends.append(end)
    return trace
