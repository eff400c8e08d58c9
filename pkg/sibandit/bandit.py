"""Batched single-index bandit with arm elimination.

The horizon is cut into epochs of geometrically growing length. Within epoch
m the policy pulls uniformly among the arms still active at the current
covariate, using the estimators frozen at the end of epoch m - 1. At the end
of the epoch every arm is refitted by single-index regression on the samples
it collected during that epoch only. When the horizon cuts the final epoch
short, an arm keeps its previous estimator unless the shortened epoch gave it
more samples.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from joblib import Parallel, delayed
from sklearn.utils import check_random_state

from .environment import draw_rewards, sample_covariates
from .estimation.lpe import floor_strict
from .estimation.mrc import MrcSearchConfig
from .estimation.sireg import ConstantEstimator, fit_sireg
from .exceptions import ConfigError, InsufficientDataError, SibanditWarning
from .trace import RegretTrace

logger = logging.getLogger(__name__)

MAX_EPOCHS = 200
MIN_C_T = 1e-3


def epoch_length(m, n, d, beta, C_T, c_eps):
    """n_m = ceil(C_T ((d + log^2 n) / eps_m^(2 / min(1, beta))
    + (log n / eps_m^2)^((2 beta + 1) / (2 beta))))."""
    log_n = math.log(n) if n > 1 else 0.0
    eps = c_eps * 2.0 ** (-m)
    first = (d + log_n ** 2) / eps ** (2.0 / min(1.0, beta))
    second = (log_n / eps ** 2) ** ((2.0 * beta + 1.0) / (2.0 * beta))
    return int(math.ceil(C_T * (first + second)))


def calibrate_C_T(n, d, beta, c_eps):
    """Halve C_T from 1 until the first epoch fits in a quarter of the horizon."""
    C_T = 1.0
    while C_T > MIN_C_T and epoch_length(1, n, d, beta, C_T, c_eps) > n / 4.0:
        C_T /= 2.0
    return max(C_T, MIN_C_T)


@dataclass(frozen=True, eq=False)
class EpochSchedule:
    """Epoch lengths of the batched policy.

    ``eps[m]`` is eps_m for m = 0..M, ``lengths[m - 1]`` is n_m and
    ``cum[m - 1]`` is S_m = n_1 + ... + n_m, for m = 1..M. The last epoch is
    truncated when played so that the played lengths sum to n.
    """

    n: int
    d: int
    beta: float
    C_T: float
    c_eps: float
    eps: np.ndarray
    lengths: np.ndarray
    cum: np.ndarray

    @property
    def M(self):
        return len(self.lengths)

    def epsilon(self, m):
        return self.c_eps * 2.0 ** (-m)

    @property
    def played_lengths(self):
        return np.diff(np.minimum(self.cum, self.n), prepend=0)

    def bounds(self, m):
        """Rounds [start, end) played in epoch m (1-based)."""
        end = int(min(self.cum[m - 1], self.n))
        start = int(min(self.cum[m - 2], self.n)) if m > 1 else 0
        return start, end


def build_schedule(n, d, beta, C_T=None, c_eps=0.5):
    """Epoch schedule of the batched bandit over horizon ``n``.

    Parameters
    ----------
    n : int
        Horizon.
    d : int
        Covariate dimension.
    beta : float
        Link smoothness.
    C_T : float or None
        Epoch length constant; None calibrates it so that n_1 <= n / 4.
    c_eps : float
        eps_m = c_eps 2^-m, in (0, 0.6].

    Returns
    -------
    EpochSchedule
    """
    if n < 1:
        raise ConfigError("the horizon must be at least 1", "horizon")
    if not 0 < c_eps <= 0.6:
        raise ConfigError("c_eps must lie in (0, 0.6]", "c_eps")
    if C_T is None:
        C_T = calibrate_C_T(n, d, beta, c_eps)
    lengths = []
    total = 0
    while total < n:
        if len(lengths) >= MAX_EPOCHS:
            raise ConfigError("schedule does not cover the horizon in {} epochs".format(
                MAX_EPOCHS), "C_T")
        length = max(epoch_length(len(lengths) + 1, n, d, beta, C_T, c_eps), 1)
        lengths.append(length)
        total += length
    if lengths[0] > n:
        logger.info("first epoch (%d rounds) exceeds the horizon %d, single epoch", lengths[0], n)
    lengths = np.array(lengths, dtype=np.int64)
    eps = c_eps * 2.0 ** (-np.arange(len(lengths) + 1))
    return EpochSchedule(n, d, beta, C_T, c_eps, eps, lengths, np.cumsum(lengths))


def _keep_near_best(mask, G, threshold):
    best = np.where(mask, G, -np.inf).max(axis=1)
    return mask & (best[:, None] - G <= threshold)


def _predictions(estimators, X):
    return np.column_stack([est(X) for est in estimators])


def active_masks(estimators, X, m, schedule, return_chain=False):
    """Active arm sets K_m(x) for every row of ``X`` as an (n, K) mask.

    ``estimators[j][k]`` is the estimator of arm k at the end of epoch j,
    ``estimators[0]`` being the zero functions. K_0(x) holds every arm; each
    later epoch first keeps the arms within eps_{j-1} / 2 of the best
    epoch j - 1 estimate, then those within eps_j of the best epoch j estimate.
    With ``return_chain`` the masks after every filter are returned as well.
    """
    X = np.atleast_2d(X)
    K = len(estimators[0])
    mask = np.ones((X.shape[0], K), dtype=bool)
    chain = [mask]
    if m == 0:
        return (mask, chain) if return_chain else mask
    G_prev = _predictions(estimators[0], X)
    for j in range(1, m + 1):
        mask = _keep_near_best(mask, G_prev, schedule.epsilon(j - 1) / 2.0)
        chain.append(mask)
        G_prev = _predictions(estimators[j], X)
        mask = _keep_near_best(mask, G_prev, schedule.epsilon(j))
        chain.append(mask)
    return (mask, chain) if return_chain else mask


@dataclass
class BanditConfig:
    """Constants of the single-index policy."""

    beta: float
    C_H: float = 1.0
    cross_fit: bool = False
    clamp_predictions: bool = False
    min_fit_samples: Optional[int] = None
    mrc: MrcSearchConfig = field(default_factory=MrcSearchConfig)
    seed: int = 0
    n_jobs: int = 1

    @property
    def fit_threshold(self):
        if self.min_fit_samples is not None:
            return self.min_fit_samples
        return 4 * (floor_strict(self.beta) + 2)

    @classmethod
    def from_constants(cls, constants, beta=None, seed=0, n_jobs=1):
        return cls(
            beta=constants["beta"] if beta is None else beta,
            C_H=constants["C_H"],
            cross_fit=constants["cross_fit"],
            clamp_predictions=constants["clamp_predictions"],
            min_fit_samples=constants["min_fit_samples"],
            mrc=MrcSearchConfig.from_params(constants["mrc"]),
            seed=seed,
            n_jobs=n_jobs,
        )


@dataclass(eq=False)
class BanditState:
    """Estimators of every finished epoch plus the running trace.

    ``estimators[j]`` is frozen once epoch j + 1 starts; ``logs[k]`` holds the
    samples of arm k in the last played epoch. Rounds are numbered from
    ``offset`` when the policy runs after an exploration phase.
    """

    K: int
    estimators: List[list] = field(default_factory=list)
    epoch: int = 0
    logs: list = field(default_factory=list)
    trace: RegretTrace = field(default_factory=RegretTrace)
    offset: int = 0

    def __post_init__(self):
        if not self.estimators:
            self.estimators = [[ConstantEstimator(0.0) for _ in range(self.K)]]


def active_set(state, x, m, schedule):
    """Arms active at covariate ``x`` after epoch ``m``."""
    if m > state.epoch:
        raise ValueError("epoch {} has not been played yet".format(m))
    mask = active_masks(state.estimators, np.reshape(x, (1, -1)), m, schedule)
    return set(np.flatnonzero(mask[0]).tolist())


def choose_uniform(mask, rng):
    """One arm per row, uniformly among the True entries of ``mask``."""
    counts = mask.sum(axis=1)
    pick = np.floor(rng.random_sample(mask.shape[0]) * counts).astype(np.int64)
    return np.argmax(np.cumsum(mask, axis=1) > pick[:, None], axis=1)


def _refit(X, y, config, seed):
    try:
        return fit_sireg(X, y, config.beta, C_H=config.C_H, seed=seed,
                         cross_fit=config.cross_fit, mrc_config=config.mrc,
                         clamp=config.clamp_predictions)
    except InsufficientDataError as err:
        logger.debug("refit skipped: %s", err)
        return None


def run_epoch(state, env, schedule, config, random_state=None):
    """Play the next epoch and refit every arm on the samples it collected.

    The estimators of the finished epochs are frozen while the epoch is played,
    so all covariates of the epoch are drawn first and their active sets are
    computed in one pass; pulls and rewards then follow in round order.
    """
    rng = check_random_state(random_state)
    m = state.epoch + 1
    if m > schedule.M:
        raise ValueError("all {} epochs have been played".format(schedule.M))
    start, end = schedule.bounds(m)
    T = end - start

    X = sample_covariates(env.covariate_law, T, rng)
    mask = active_masks(state.estimators, X, m - 1, schedule)
    arms = choose_uniform(mask, rng)
    y = draw_rewards(env, arms, X, rng)
    state.trace.extend(arms, env.regret(X, arms))
    state.logs = [(X[arms == k], y[arms == k]) for k in range(state.K)]

    previous = state.estimators[-1]
    # a cut-off final epoch only replaces estimators fitted on more samples
    truncated = T < schedule.lengths[m - 1]
    eligible = []
    for k in range(state.K):
        n_k = len(state.logs[k][1])
        if n_k < config.fit_threshold:
            continue
        if truncated and n_k < previous[k].n_samples:
            logger.debug("epoch %d is truncated: arm %d keeps the fit on %d samples over %d",
                         m, k, previous[k].n_samples, n_k)
            continue
        eligible.append(k)
    fits = Parallel(n_jobs=config.n_jobs)(
        delayed(_refit)(state.logs[k][0], state.logs[k][1], config,
                        config.seed + 1000 * m + k)
        for k in eligible)
    refitted = dict(zip(eligible, fits))
    current = []
    for k in range(state.K):
        est = refitted.get(k)
        if est is None:
            logger.debug("epoch %d: arm %d keeps its previous estimator (%d samples)",
                         m, k, len(state.logs[k][1]))
            est = previous[k]
        current.append(est)
        if est.index is not None:
            truth = getattr(env, "indices", None)
            error = np.linalg.norm(est.index.v - truth[k]) if truth is not None else np.nan
            state.trace.add_index_diagnostic(m, k, error, est.index.objective_value)
    state.estimators.append(current)
    state.epoch = m
    state.trace.epoch_ends.append(state.offset + end)
    logger.debug("epoch %d done: rounds %d-%d, pulls per arm %s", m, start + 1, end,
                 np.bincount(arms, minlength=state.K).tolist())
    return state


def run_policy(env, schedule, config, random_state=None, trial=0, state=None):
    """Run the batched policy over the whole horizon of ``schedule``. A
    ``state`` carrying an earlier trace is continued."""
    rng = check_random_state(random_state)
    if state is None:
        state = BanditState(K=env.K, trace=RegretTrace(trial=trial))
    if schedule is None or schedule.n == 0:
        return state.trace
    for _ in range(state.epoch, schedule.M):
        run_epoch(state, env, schedule, config, rng)
    return state.trace


def run_single_index(env, n, constants, random_state=None, trial=0, seed=0, n_jobs=1,
                     beta=None):
    """Build the schedule from ``constants`` and run the policy for ``n``
    rounds. ``beta`` overrides the smoothness in ``constants``."""
    config = BanditConfig.from_constants(constants, beta=beta, seed=seed, n_jobs=n_jobs)
    if n == 0:
        return RegretTrace(trial=trial)
    schedule = build_schedule(n, env.d, config.beta, constants["C_T"], constants["c_eps"])
    if schedule.M == 1 and env.K > 1:
        warnings.warn("the schedule has a single epoch, the policy never eliminates",
                      SibanditWarning)
    logger.info("single-index bandit: n=%d, M=%d epochs, C_T=%.4g", n, schedule.M,
                schedule.C_T)
    return run_policy(env, schedule, config, random_state, trial)
