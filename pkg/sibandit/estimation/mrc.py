"""Maximum rank correlation (MRC) index estimation.

The objective counts ordered pairs whose responses and projections are in
the same strict order,

    Gamma(v) = 1 / (n (n - 1)) * sum_{i != j} 1(Y_i > Y_j) 1(X_i^T v > X_j^T v),

and the estimator maximises it over indices with first coordinate 1 and
Euclidean norm at most ``bound``. The count is computed by sorting on the
projection and counting ascending rank pairs level by level, as in a bottom-up
merge sort, for a whole population of candidate indices at once.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed, effective_n_jobs
from scipy.optimize import differential_evolution
from sklearn.utils import check_random_state

from ..exceptions import ConfigError, InsufficientDataError

logger = logging.getLogger(__name__)

INCREASING = "increasing"
DECREASING = "decreasing"
DIRECTIONS = (INCREASING, DECREASING)


@dataclass(frozen=True, eq=False)
class IndexEstimate:
    v: np.ndarray
    objective_value: float
    direction: str = INCREASING
    trace: Optional[pd.DataFrame] = None


@dataclass(frozen=True)
class MrcSearchConfig:
    """Differential evolution settings for the MRC search.

    Parameters
    ----------
    bound : float
        Norm bound B_v of the search space {u : u_1 = 1, ||u||_2 <= B_v}.
    population_size : int or None
        Population members per generation, 15 * (d - 1) when None.
    max_generations : int
        Generation cap of each restart.
    restarts : int
        Independent restarts; the best candidate over all of them wins.
    seed : int
        Restart r uses seed + r. Also seeds the subsample.
    subsample_cap : int or None
        When set, the objective is evaluated on at most this many samples,
        chosen by ``seed``.
    mutation, recombination, tol : float
        Passed to scipy's differential evolution.
    n_jobs : int
        Threads used to evaluate a generation.
    trace_file : str or None
        CSV file receiving (restart, generation, best_objective).
    """

    bound: float = 2.0
    population_size: Optional[int] = None
    max_generations: int = 200
    restarts: int = 2
    seed: int = 0
    subsample_cap: Optional[int] = None
    mutation: float = 0.7
    recombination: float = 0.9
    tol: float = 0.01
    n_jobs: int = 1
    trace_file: Optional[str] = None

    def __post_init__(self):
        if self.population_size is not None and self.population_size < 4:
            raise ConfigError("differential evolution needs at least 4 members",
                              "population_size")
        if self.max_generations < 1 or self.restarts < 1:
            raise ConfigError("generations and restarts must be positive")

    @classmethod
    def from_params(cls, params):
        return cls(**params)

    def population(self, d):
        if self.population_size is not None:
            return self.population_size
        return 15 * max(d - 1, 1)


def response_ranks(y, direction=INCREASING):
    """Dense integer ranks of the responses, reversed for a decreasing link."""
    if direction not in DIRECTIONS:
        raise ValueError("direction must be one of {}".format(DIRECTIONS))
    y = np.asarray(y, dtype=float)
    if direction == DECREASING:
        y = -y
    return np.unique(y, return_inverse=True)[1].astype(np.int64).ravel()


def concordance_counts(P, ranks):
    """Number of ordered pairs (i, j) with ``P[i] > P[j]`` and
    ``ranks[i] > ranks[j]``, for every row of ``P``.

    Parameters
    ----------
    P : array, shape (S, n) or (n,)
        Projections of the n samples on S candidate indices.
    ranks : int array, shape (n,)
        Response ranks.

    Returns
    -------
    counts : int64 array, shape (S,)
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    ranks = np.asarray(ranks, dtype=np.int64)
    S, n = P.shape
    total = np.zeros(S, dtype=np.int64)
    if n < 2:
        return total

    # within equal projections the larger rank comes first, so ties never count
    by_rank = np.argsort(-ranks, kind="stable")
    order = by_rank[np.argsort(P[:, by_rank], axis=1, kind="stable")]

    sentinel = int(ranks.max()) + 1
    npad = 1 << (n - 1).bit_length()
    A = np.full((S, npad), sentinel, dtype=np.int64)
    A[:, :n] = ranks[order]

    width = 1
    while width < npad:
        n_blocks = S * (npad // (2 * width))
        blocks = A.reshape(n_blocks, 2 * width)
        left, right = blocks[:, :width], blocks[:, width:]
        offsets = np.arange(n_blocks, dtype=np.int64) * (sentinel + 1)
        keys = (left + offsets[:, None]).ravel()
        below = np.searchsorted(keys, (right + offsets[:, None]).ravel(), side="left")
        below = below.reshape(n_blocks, width) - (np.arange(n_blocks) * width)[:, None]
        below[right == sentinel] = 0
        total += below.reshape(S, -1).sum(axis=1)
        A = np.sort(blocks, axis=1).reshape(S, npad)
        width *= 2
    return total


def rank_objective(X, y, v, direction=INCREASING):
    """Empirical rank correlation of the samples ``(X, y)`` along ``v``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    if n < 2:
        raise InsufficientDataError("the rank objective needs at least 2 samples")
    count = concordance_counts(X @ np.asarray(v, dtype=float), response_ranks(y, direction))
    return float(count[0]) / (n * (n - 1))


class _RankSearch(object):
    """Vectorised objective handed to differential evolution. Keeps the best
    index seen so far under (larger count, smaller norm, lexicographic)."""

    def __init__(self, X, ranks, radius, n_jobs=1):
        self.X = X
        self.ranks = ranks
        self.radius = radius
        self.n_jobs = n_jobs
        self.n_pairs = X.shape[0] * (X.shape[0] - 1)
        self.best_count = -1
        self.best_key = None
        self.best_v = None
        self.restart = 0
        self.generation = 0
        self.trace = []

    def project(self, free):
        norms = np.linalg.norm(free, axis=1)
        over = norms > self.radius
        free = free.copy()
        free[over] *= (self.radius / norms[over])[:, None]
        return np.column_stack([np.ones(free.shape[0]), free])

    def counts(self, V):
        if self.n_jobs == 1 or V.shape[0] < 2:
            return concordance_counts(V @ self.X.T, self.ranks)
        chunks = np.array_split(V, min(effective_n_jobs(self.n_jobs), V.shape[0]))
        parts = Parallel(n_jobs=self.n_jobs, prefer="threads")(
            delayed(concordance_counts)(chunk @ self.X.T, self.ranks) for chunk in chunks)
        return np.concatenate(parts)

    def __call__(self, x):
        free = np.atleast_2d(np.asarray(x, dtype=float).T)
        V = self.project(free)
        counts = self.counts(V)
        top = counts.max()
        for i in np.flatnonzero(counts == top):
            key = (-int(counts[i]), float(np.linalg.norm(V[i])), tuple(V[i]))
            if self.best_key is None or key < self.best_key:
                self.best_key = key
                self.best_count = int(counts[i])
                self.best_v = V[i].copy()
        self.trace.append((self.restart, self.generation, self.best_count / self.n_pairs))
        self.generation += 1
        values = -counts / self.n_pairs
        return values if np.ndim(x) > 1 else values[0]


def maximize_mrc(X, y, config=None, direction=INCREASING):
    """Maximise the rank objective over {u : u_1 = 1, ||u||_2 <= bound}.

    Parameters
    ----------
    X : array, shape (n, d)
    y : array, shape (n,)
    config : MrcSearchConfig
    direction : {"increasing", "decreasing"}
        Kernel of the objective; "decreasing" estimates the index of a
        decreasing link.

    Returns
    -------
    IndexEstimate
        The best index found, its objective on the (sub)sample and the
        optimiser trace.
    """
    config = config or MrcSearchConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if n < 2:
        raise InsufficientDataError("MRC needs at least 2 samples, got {}".format(n))
    if d < 2:
        raise ConfigError("MRC needs d >= 2", "d")
    if config.bound < 1.0:
        raise ConfigError("empty search space: bound {} < 1".format(config.bound), "bound")

    if config.subsample_cap is not None and n > config.subsample_cap:
        rng = check_random_state(config.seed)
        keep = np.sort(rng.choice(n, config.subsample_cap, replace=False))
        X, y = X[keep], y[keep]
        n = len(keep)

    ranks = response_ranks(y, direction)
    radius = math.sqrt(config.bound ** 2 - 1.0)
    search = _RankSearch(X, ranks, radius, n_jobs=config.n_jobs)

    if radius == 0.0:
        search(np.zeros((d - 1, 1)))
    else:
        members = config.population(d)
        popsize = max(1, int(math.ceil(members / (d - 1))))
        for restart in range(config.restarts):
            search.restart, search.generation = restart, 0
            differential_evolution(
                search,
                bounds=[(-radius, radius)] * (d - 1),
                strategy="best1bin",
                maxiter=config.max_generations,
                popsize=popsize,
                tol=config.tol,
                mutation=config.mutation,
                recombination=config.recombination,
                seed=config.seed + restart,
                polish=False,
                init="latinhypercube",
                updating="deferred",
                vectorized=True,
            )
            logger.debug("MRC restart %d: best objective %.6f after %d generations",
                         restart, search.best_count / search.n_pairs, search.generation)

    trace = pd.DataFrame(search.trace, columns=["restart", "generation", "best_objective"])
    if config.trace_file is not None:
        trace.to_csv(config.trace_file, index=False, float_format="%.10g")
    return IndexEstimate(
        v=search.best_v,
        objective_value=search.best_count / search.n_pairs,
        direction=direction,
        trace=trace,
    )


def choose_direction(X, y, config=None):
    """Pick the link direction whose kernel reaches the larger objective,
    using a reduced search budget. Ties go to increasing."""
    config = config or MrcSearchConfig()
    quick = replace(config, max_generations=max(10, config.max_generations // 4),
                    restarts=1, trace_file=None)
    up = maximize_mrc(X, y, quick, INCREASING)
    down = maximize_mrc(X, y, quick, DECREASING)
    return DECREASING if down.objective_value > up.objective_value else INCREASING
