"""One-dimensional local polynomial estimation with a uniform kernel."""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from ..exceptions import InsufficientDataError, SibanditWarning

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12

# constant texts, so the default filter reports each kind once per call site
DEGREE_FALLBACK_MSG = "local polynomial fit fell back to a lower degree on a deficient window"
EXPANDED_WINDOW_MSG = "empty local polynomial window, averaged the nearest training points"


def floor_strict(beta):
    """Largest integer strictly smaller than ``beta``."""
    if beta <= 0:
        raise ValueError("beta must be positive, got {}".format(beta))
    return int(math.ceil(beta)) - 1


def bandwidth_hn(n, d, beta, C_H=1.0):
    """h_n = (log n / n)^(1/(2 beta + 1)) v C_H ((d + log^2 n) / n)^(1/2)."""
    if n < 2:
        raise ValueError("the bandwidth rule needs n >= 2, got {}".format(n))
    log_n = math.log(n)
    return max((log_n / n) ** (1.0 / (2.0 * beta + 1.0)),
               C_H * math.sqrt((d + log_n ** 2) / n))


class LpeEstimate(NamedTuple):
    value: float
    degree: int
    expanded: bool
    in_domain: bool


@dataclass(frozen=True, eq=False)
class LinkModel:
    """Local polynomial fit of degree ``degree`` and bandwidth ``bandwidth``
    on the training pairs (z, y). Training pairs are kept sorted by z.

    ``domain`` is the evaluable interval; evaluations outside it are computed
    on the (possibly empty) window as usual but reported with
    ``in_domain=False``.
    """

    z: np.ndarray
    y: np.ndarray
    degree: int
    bandwidth: float
    domain: Tuple[float, float]
    clamp: bool = False

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if len(z) == 0:
            raise InsufficientDataError("empty training set")
        if len(z) != len(y):
            raise ValueError("z and y differ in length ({} != {})".format(len(z), len(y)))
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive, got {}".format(self.bandwidth))
        if self.degree < 0:
            raise ValueError("degree must be nonnegative, got {}".format(self.degree))
        order = np.argsort(z, kind="stable")
        object.__setattr__(self, "z", z[order])
        object.__setattr__(self, "y", y[order])
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    @property
    def n(self):
        return len(self.z)

    def window(self, a):
        h = self.bandwidth
        lo = np.searchsorted(self.z, a - h, side="left")
        hi = np.searchsorted(self.z, a + h, side="right")
        return lo, hi

    def evaluate(self, a):
        """Fitted intercept at ``a`` with the degree actually used and the
        fallback flags."""
        a = float(a)
        lo, hi = self.window(a)
        zw = (self.z[lo:hi] - a) / self.bandwidth
        yw = self.y[lo:hi]

        value, p, expanded = None, self.degree, False
        while p > 0 and value is None:
            if len(np.unique(zw)) >= p + 1:
                basis = np.vander(zw, p + 1, increasing=True)
                if np.linalg.cond(basis.T @ basis) <= MAX_CONDITION:
                    value = np.linalg.lstsq(basis, yw, rcond=None)[0][0]
                    break
            p -= 1
        if value is None:
            p = 0
            if len(yw):
                value = yw.mean()
            else:
                k = min(max(2, self.degree + 1), self.n)
                nearest = np.argsort(np.abs(self.z - a), kind="stable")[:k]
                value = self.y[nearest].mean()
                expanded = True
                logger.debug("empty window at %.4g, averaged %d nearest points", a, k)
                warnings.warn(EXPANDED_WINDOW_MSG, SibanditWarning, stacklevel=2)
        if p < self.degree and not expanded:
            logger.debug("degree %d fit at %.4g fell back to degree %d (%d points)",
                         self.degree, a, p, hi - lo)
            warnings.warn(DEGREE_FALLBACK_MSG, SibanditWarning, stacklevel=2)
        if self.clamp:
            value = min(max(value, 0.0), 1.0)
        in_domain = self.domain[0] <= a <= self.domain[1]
        return LpeEstimate(float(value), p, expanded, in_domain)

    def evaluate_many(self, A):
        """Evaluate at every point of ``A``. Returns (values, degrees,
        expanded, in_domain) arrays."""
        results = [self.evaluate(a) for a in np.asarray(A, dtype=float).ravel()]
        if not results:
            return (np.zeros(0), np.zeros(0, dtype=int), np.zeros(0, dtype=bool),
                    np.zeros(0, dtype=bool))
        values, degrees, expanded, in_domain = zip(*results)
        return (np.array(values), np.array(degrees), np.array(expanded),
                np.array(in_domain))

    def __call__(self, A):
        return self.evaluate_many(A)[0]


def fit_link(z, y, degree, bandwidth, domain=None, clamp=False):
    """Build a LinkModel; the domain defaults to the training range."""
    z = np.asarray(z, dtype=float).ravel()
    if len(z) == 0:
        raise InsufficientDataError("empty training set")
    if domain is None:
        domain = (z.min(), z.max())
    return LinkModel(z, y, degree, bandwidth, domain, clamp)


def fit_predict(model: LinkModel, a: float) -> float:
    return model.evaluate(a).value
