"""Offline single-index regression.

The samples are split by arrival order into even and odd positions; the index
is estimated by maximum rank correlation on the first half, the second half is
projected on it and the link is fitted there by local polynomial estimation.
With cross-fitting the roles are swapped and both plug-in fits are averaged.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import InsufficientDataError
from .lpe import LinkModel, bandwidth_hn, floor_strict
from .mrc import INCREASING, IndexEstimate, MrcSearchConfig, choose_direction, maximize_mrc

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PlugInFit:
    index: IndexEstimate
    link: LinkModel

    @property
    def region(self):
        return self.link.domain

    def predict_many(self, X):
        z = np.atleast_2d(X) @ self.index.v
        lo, hi = self.region
        inside = (z >= lo) & (z <= hi)
        values = self.link(np.clip(z, lo, hi))
        return values, inside


@dataclass(frozen=True, eq=False)
class RewardEstimator:
    """Fitted reward function g(x) = f(v^T x) of one arm.

    ``evaluable_region`` is the range of the held-out projections widened by
    C_H * h_n. Queries projecting outside it are evaluated at the nearest
    boundary and reported as out of region.
    """

    index: IndexEstimate
    link: LinkModel
    cross_fit_partner: Optional[Tuple[IndexEstimate, LinkModel]] = None
    n_samples: int = 0

    @property
    def evaluable_region(self):
        return self.link.domain

    def fits(self):
        yield PlugInFit(self.index, self.link)
        if self.cross_fit_partner is not None:
            yield PlugInFit(*self.cross_fit_partner)

    def predict_many(self, X):
        """Values and in-region flags for every row of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        values = np.zeros(X.shape[0])
        in_region = np.ones(X.shape[0], dtype=bool)
        n_fits = 0
        for fit in self.fits():
            v, inside = fit.predict_many(X)
            values += v
            in_region &= inside
            n_fits += 1
        return values / n_fits, in_region

    def predict(self, x):
        values, in_region = self.predict_many(np.asarray(x, dtype=float).reshape(1, -1))
        return float(values[0]), bool(in_region[0])

    def __call__(self, X):
        return self.predict_many(X)[0]


class ConstantEstimator(object):
    """Reward estimator returning a constant; the epoch-0 estimator is
    ConstantEstimator(0.0)."""

    index = None
    n_samples = 0

    def __init__(self, value=0.0):
        self.value = float(value)

    def predict_many(self, X):
        n = np.atleast_2d(X).shape[0]
        return np.full(n, self.value), np.ones(n, dtype=bool)

    def predict(self, x):
        return self.value, True

    def __call__(self, X):
        return self.predict_many(X)[0]


def split_samples(X, y):
    """Even/odd interleaved split by arrival order."""
    return (X[0::2], y[0::2]), (X[1::2], y[1::2])


def _plug_in(X_index, y_index, X_link, y_link, degree, h, C_H, config, direction, clamp):
    index = maximize_mrc(X_index, y_index, config, direction)
    z = X_link @ index.v
    region = (z.min() - C_H * h, z.max() + C_H * h)
    return index, LinkModel(z, y_link, degree, h, region, clamp)


def fit_sireg(X, y, beta, C_H=1.0, seed=0, cross_fit=False, mrc_config=None,
              direction=INCREASING, clamp=False):
    """Single-index regression by maximum rank correlation.

    Parameters
    ----------
    X : array, shape (n, d)
        Covariates in arrival order.
    y : array, shape (n,)
        Responses.
    beta : float
        Smoothness of the link; the local polynomial degree is the largest
        integer strictly below it.
    C_H : float
        Bandwidth constant of h_n, also the widening of the evaluable region.
    seed : int
        Seed of the index search.
    cross_fit : bool
        Fit a second time with the halves swapped and average.
    mrc_config : MrcSearchConfig, optional
    direction : {"increasing", "decreasing", "auto"}
        Link direction; "auto" picks it on the index half.
    clamp : bool
        Clamp link predictions to [0, 1].

    Returns
    -------
    RewardEstimator
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    n, d = X.shape
    if n < 4:
        raise InsufficientDataError("single-index regression needs at least 4 samples, "
                                    "got {}".format(n))
    if len(y) != n:
        raise ValueError("X and y differ in length ({} != {})".format(n, len(y)))

    config = replace(mrc_config or MrcSearchConfig(), seed=seed)
    (X1, y1), (X2, y2) = split_samples(X, y)
    if direction == "auto":
        direction = choose_direction(X1, y1, config)

    h = bandwidth_hn(n, d, beta, C_H)
    degree = floor_strict(beta)
    index, link = _plug_in(X1, y1, X2, y2, degree, h, C_H, config, direction, clamp)
    partner = None
    if cross_fit:
        partner = _plug_in(X2, y2, X1, y1, degree, h, C_H, config, direction, clamp)
    logger.debug("sireg fit on %d samples: v=%s, h=%.4g, degree %d",
                 n, np.array2string(index.v, precision=3), h, degree)
    return RewardEstimator(index, link, partner, n)


def predict(est, x):
    """(value, in_region) of a fitted estimator at one covariate."""
    return est.predict(x)


class SingleIndexRegressor(BaseEstimator, RegressorMixin):
    """Single-index regression with an MRC index and a local polynomial link.

    Parameters
    ----------
    beta : float, default 1.5
        Link smoothness; sets the polynomial degree and the bandwidth.
    C_H : float, default 1.0
        Bandwidth constant.
    cross_fit : bool, default False
        Average the two plug-in fits obtained by swapping the halves.
    direction : {"increasing", "decreasing", "auto"}
    clamp : bool, default False
        Clamp predictions to [0, 1], for binary responses.
    bound : float, default 2.0
        Norm bound of the index search space.
    max_generations, restarts, population_size, subsample_cap :
        Differential evolution settings, see MrcSearchConfig.
    random_state : int, RandomState instance or None, default 0
    n_jobs : int, default 1
        Threads used to evaluate the search population.

    Attributes
    ----------
    estimator_ : RewardEstimator
    coef_ : array, shape (n_features,)
        Estimated index, first coordinate 1.
    """

    def __init__(self, beta=1.5, C_H=1.0, cross_fit=False, direction=INCREASING,
                 clamp=False, bound=2.0, max_generations=200, restarts=2,
                 population_size=None, subsample_cap=None, random_state=0, n_jobs=1):
        self.beta = beta
        self.C_H = C_H
        self.cross_fit = cross_fit
        self.direction = direction
        self.clamp = clamp
        self.bound = bound
        self.max_generations = max_generations
        self.restarts = restarts
        self.population_size = population_size
        self.subsample_cap = subsample_cap
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _seed(self):
        if isinstance(self.random_state, (int, np.integer)):
            return int(self.random_state)
        return int(check_random_state(self.random_state).randint(np.iinfo(np.int32).max))

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        config = MrcSearchConfig(bound=self.bound, population_size=self.population_size,
                                 max_generations=self.max_generations,
                                 restarts=self.restarts, subsample_cap=self.subsample_cap,
                                 n_jobs=self.n_jobs)
        self.estimator_ = fit_sireg(X, y, self.beta, C_H=self.C_H, seed=self._seed(),
                                    cross_fit=self.cross_fit, mrc_config=config,
                                    direction=self.direction, clamp=self.clamp)
        self.coef_ = self.estimator_.index.v
        self.direction_ = self.estimator_.index.direction
        return self

    def predict(self, X):
        check_is_fitted(self, "estimator_")
        X = check_array(X)
        return self.estimator_.predict_many(X)[0]

    def in_region(self, X):
        """True where the projection of X lies in the evaluable region."""
        check_is_fitted(self, "estimator_")
        X = check_array(X)
        return self.estimator_.predict_many(X)[1]
