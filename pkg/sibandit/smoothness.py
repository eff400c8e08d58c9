"""Lepski-type estimation of the link smoothness and the adaptive bandit.

Every arm is explored for 2 N0 rounds. The index is estimated on the first
half, the second half is projected on it, and in every lattice bin of width
2^-l1 two local polynomial fits are compared, one with bandwidth 2^-l1 and one
with 2^-l2. The largest discrepancy b_max over arms, bins and grid points
gives the smoothness estimate, which the batched bandit then uses for the
remaining rounds.
"""

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.utils import check_random_state

from .bandit import BanditConfig, BanditState, build_schedule, run_policy
from .environment import draw_rewards, sample_covariates
from .estimation.lpe import LinkModel, floor_strict
from .estimation.mrc import MrcSearchConfig, maximize_mrc
from .exceptions import ConfigError, InsufficientDataError, SibanditWarning
from .stream import ArmStream
from .trace import BIN_COLUMNS, RegretTrace

logger = logging.getLogger(__name__)


def _loglog2(n):
    # natural inner log, base-2 outer log
    return math.log2(math.log(n))


def lepski_levels(n, beta_lo, beta_hi):
    """Resolution levels (l1, l2, l3) of the bins, the fine bandwidth and the
    evaluation grid."""
    if n < 3:
        raise ValueError("the Lepski levels need n >= 3, got {}".format(n))
    l1 = int(math.ceil(beta_lo * math.log2(n) / (2.0 * beta_hi + 1.0) ** 2))
    l2 = l1 + int(math.ceil(_loglog2(n) / beta_lo))
    l3 = int(math.ceil(beta_hi / beta_lo * l1 + _loglog2(n) / beta_lo))
    return l1, l2, l3


class ExplorationBudget(NamedTuple):
    N0: int
    capped: bool
    C_gap: float


def exploration_budget(n, d, beta_lo, beta_hi, C_gap=1.0, K=1):
    """N0 = ceil(C_gap (d + log^2 n) n^(2 beta_lo (beta_hi + 1) / (2 beta_hi + 1)^2)),
    capped at floor(n / (4 K)) so that the exploration takes at most half of
    the horizon. The returned C_gap is the one effectively used."""
    log_n = math.log(n) if n > 1 else 0.0
    factor = (d + log_n ** 2) * n ** (2.0 * beta_lo * (beta_hi + 1.0) / (2.0 * beta_hi + 1.0) ** 2)
    N0 = int(math.ceil(C_gap * factor))
    cap = n // (4 * K)
    if N0 > cap:
        reduced = cap / factor
        msg = ("exploration budget N0={} exceeds n/(4K)={}, C_gap reduced from {:.4g} "
               "to {:.4g}".format(N0, cap, C_gap, reduced))
        logger.warning(msg)
        warnings.warn(msg, SibanditWarning)
        return ExplorationBudget(cap, True, reduced)
    return ExplorationBudget(N0, False, C_gap)


@dataclass(frozen=True)
class SmoothnessConfig:
    """Constants of the smoothness estimation, beta_lo < 1 < beta_hi."""

    beta_lo: float
    beta_hi: float
    C_gap: float = 1.0
    C_l: float = 1.0
    C_H: float = 1.0
    mrc: MrcSearchConfig = field(default_factory=MrcSearchConfig)

    def __post_init__(self):
        if not 0 < self.beta_lo < 1 < self.beta_hi:
            raise ConfigError("need 0 < beta_lo < 1 < beta_hi", "beta_lo")
        threshold = 2.0 / min(self.beta_lo, 1.0 - self.beta_lo)
        if not self.beta_hi > threshold:
            msg = ("beta_hi={} does not exceed 2 / min(beta_lo, 1 - beta_lo) = {:.4g}; "
                   "the undersmoothing guarantee does not apply".format(self.beta_hi, threshold))
            logger.warning(msg)
            warnings.warn(msg, SibanditWarning)

    @classmethod
    def from_constants(cls, constants):
        return cls(beta_lo=constants["beta_lo"], beta_hi=constants["beta_hi"],
                   C_gap=constants["C_gap"], C_l=constants["C_l"], C_H=constants["C_H"],
                   mrc=MrcSearchConfig.from_params(constants["mrc"]))

    def clamp(self, beta):
        return min(max(beta, self.beta_lo), self.beta_hi)


@dataclass(eq=False)
class SmoothnessEstimate:
    beta_est: float
    beta_raw: float
    b_max: float
    l1: int
    l2: int
    l3: int
    N0: int
    capped: bool = False
    b_max_zero: bool = False
    n_skipped: int = 0
    bins: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=BIN_COLUMNS))

    def to_dict(self):
        out = asdict(self)
        out.pop("bins")
        out["beta_raw"] = self.beta_raw if math.isfinite(self.beta_raw) else None
        out["b_max"] = self.b_max if math.isfinite(self.b_max) else None
        return out


def lattice_bins(z, width, margin):
    """Lattice bins [j w, (j + 1) w) meeting the projection range widened by
    ``margin``."""
    lo = math.floor((z.min() - margin) / width)
    hi = math.floor((z.max() + margin) / width)
    return [(j * width, (j + 1) * width) for j in range(lo, hi + 1)]


def bin_discrepancies(z, y, degree, l1, l2, l3, margin):
    """Compare the coarse and fine fits in every nonempty bin.

    A grid point counts only when both fits ran at full degree without an
    empty-window fallback and the fine window holds at least
    ``2 (degree + 1)`` points, so exact interpolants through a few
    near-coincident points never count. Returns the list of per-bin rows
    (bin_lo, bin_hi, n_points, n_grid, n_skipped, discrepancy); discrepancy is
    NaN when no grid point of the bin counts.
    """
    width, fine, step = 2.0 ** -l1, 2.0 ** -l2, 2.0 ** -l3
    z_lo, z_hi = z.min() - margin, z.max() + margin
    rows = []
    for lo, hi in lattice_bins(z, width, margin):
        inside = (z >= lo) & (z < hi)
        if not inside.any():
            continue
        coarse = LinkModel(z[inside], y[inside], degree, width, (lo, hi))
        sharp = LinkModel(z[inside], y[inside], degree, fine, (lo, hi))
        k = np.arange(math.ceil(max(lo, z_lo) / step), math.floor(hi / step) + 1)
        grid = k * step
        grid = grid[(grid >= lo) & (grid < hi) & (grid <= z_hi)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SibanditWarning)
            f1, d1, e1, _ = coarse.evaluate_many(grid)
            f2, d2, e2, _ = sharp.evaluate_many(grid)
        w_lo, w_hi = sharp.window(grid)
        populated = w_hi - w_lo >= 2 * (degree + 1)
        usable = ~(e1 | e2) & (d1 == degree) & (d2 == degree) & populated
        gap = np.abs(f1 - f2)[usable]
        rows.append((lo, hi, int(inside.sum()), len(grid), int((~usable).sum()),
                     float(gap.max()) if gap.size else np.nan))
    return rows


def _arm_discrepancies(arm, X, y, N0, degree, levels, margin, mrc_config):
    index = maximize_mrc(X[:N0], y[:N0], mrc_config)
    z = X[N0:] @ index.v
    rows = bin_discrepancies(z, y[N0:], degree, *levels, margin)
    return [(arm,) + row for row in rows]


def estimate_smoothness(source, n, config, random_state=None, seed=0, N0=None, n_jobs=1):
    """Estimate the link smoothness from 2 N0 exploration pulls per arm.

    Parameters
    ----------
    source : ArmStream or list of (X, y)
        Stream pulled for 2 N0 rounds per arm, or the already collected
        exploration samples of every arm, in pull order.
    n : int
        Horizon, sets the Lepski levels and N0.
    config : SmoothnessConfig
    random_state : int, RandomState instance or None
        Used when pulling from a stream.
    seed : int
        Index search of arm k uses seed + k.
    N0 : int, optional
        Exploration budget per half, computed from ``n`` when not given.

    Returns
    -------
    SmoothnessEstimate
    """
    if isinstance(source, ArmStream):
        d, K = source.d, source.K
    else:
        source = [(np.atleast_2d(np.asarray(X, dtype=float)), np.asarray(y, dtype=float))
                  for X, y in source]
        if not source:
            raise InsufficientDataError("no exploration samples")
        d, K = source[0][0].shape[1], len(source)
    capped = False
    if N0 is None:
        N0, capped, _ = exploration_budget(n, d, config.beta_lo, config.beta_hi,
                                           config.C_gap, K)
    if N0 < 2:
        raise InsufficientDataError("exploration budget N0={} is too small".format(N0))
    if isinstance(source, ArmStream):
        rng = check_random_state(random_state)
        source = [source.pull(k, 2 * N0, rng) for k in range(K)]
    for k, (_, y) in enumerate(source):
        if len(y) < 2 * N0:
            raise InsufficientDataError("arm {} has {} exploration samples, {} needed".format(
                k, len(y), 2 * N0))

    levels = lepski_levels(n, config.beta_lo, config.beta_hi)
    degree = floor_strict(config.beta_hi)
    margin = config.C_H * math.sqrt(d / N0)
    per_arm = Parallel(n_jobs=n_jobs)(
        delayed(_arm_discrepancies)(k, X[:2 * N0], y[:2 * N0], N0, degree, levels, margin,
                                    replace(config.mrc, seed=seed + k))
        for k, (X, y) in enumerate(source))
    bins = pd.DataFrame([row for rows in per_arm for row in rows], columns=BIN_COLUMNS)
    if bins.empty:
        raise InsufficientDataError("every Lepski bin is empty")
    evaluated = bins["discrepancy"].dropna()

    l1, l2, l3 = levels
    b_max = float(evaluated.max()) if not evaluated.empty else math.nan
    if evaluated.empty:
        raw = math.nan
        msg = "no grid point could be evaluated in any bin, smoothness set to beta_lo"
        logger.warning(msg)
        warnings.warn(msg, SibanditWarning)
    elif b_max > 0:
        raw = (-math.log2(b_max) / l1
               - config.C_l * _loglog2(n) / math.log2(n))
    else:
        raw = math.inf
        logger.warning("b_max = 0, smoothness set to beta_hi")
    estimate = SmoothnessEstimate(
        beta_est=config.beta_lo if math.isnan(raw) else config.clamp(raw),
        beta_raw=raw,
        b_max=b_max,
        l1=l1, l2=l2, l3=l3,
        N0=N0,
        capped=capped,
        b_max_zero=b_max == 0,
        n_skipped=int(bins["n_skipped"].sum()),
        bins=bins,
    )
    logger.info("smoothness estimate %.4g (raw %.4g, b_max %.4g, levels %d/%d/%d, N0=%d)",
                estimate.beta_est, raw, b_max, l1, l2, l3, N0)
    return estimate


def explore(env, N0, random_state=None, trace=None):
    """Pull every arm 2 N0 times in round-robin blocks, arm 0 first, and
    record the regret of each pull."""
    rng = check_random_state(random_state)
    trace = trace if trace is not None else RegretTrace()
    samples = []
    for k in range(env.K):
        X = sample_covariates(env.covariate_law, 2 * N0, rng)
        arms = np.full(2 * N0, k, dtype=np.int64)
        y = draw_rewards(env, arms, X, rng)
        trace.extend(arms, env.regret(X, arms))
        samples.append((X, y))
    return samples, trace


def run_adaptive(env, n, constants, random_state=None, trial=0, seed=0, n_jobs=1):
    """Explore for 2 K N0 rounds, estimate the smoothness, then run the
    batched bandit with the estimate on the remaining rounds. The trace
    covers the whole horizon and carries the smoothness estimate."""
    rng = check_random_state(random_state)
    config = SmoothnessConfig.from_constants(constants)
    budget = exploration_budget(n, env.d, config.beta_lo, config.beta_hi, config.C_gap, env.K)
    explored = 2 * env.K * budget.N0
    if budget.N0 < 2 or n <= explored:
        raise ConfigError("horizon {} is too short for an exploration phase of {} rounds"
                          .format(n, explored), "horizon")

    samples, trace = explore(env, budget.N0, rng, RegretTrace(trial=trial))
    estimate = estimate_smoothness(samples, n, config, seed=seed, N0=budget.N0, n_jobs=n_jobs)
    estimate.capped = budget.capped
    trace.smoothness = estimate.to_dict()

    remaining = n - explored
    bandit_config = BanditConfig.from_constants(constants, beta=estimate.beta_est, seed=seed,
                                                n_jobs=n_jobs)
    schedule = build_schedule(remaining, env.d, estimate.beta_est, constants["C_T"],
                              constants["c_eps"])
    state = BanditState(K=env.K, trace=trace, offset=explored)
    logger.info("adaptive bandit: %d exploration rounds, %d epochs on the remaining %d",
                explored, schedule.M, remaining)
    return run_policy(env, schedule, bandit_config, rng, trial, state=state)
