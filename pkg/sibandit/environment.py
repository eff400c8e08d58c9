"""Ground-truth single-index bandit environments.

Each arm k pays ``f_k(v_k^T x) + noise`` for a covariate ``x`` drawn from a
compact law. Index vectors are normalised to first coordinate 1. Arms are
0-based throughout the package.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from sklearn.utils import check_random_state

from .exceptions import BudgetExceededError, ConfigError
from .params import check_keys

logger = logging.getLogger(__name__)

LINK_FAMILIES = ("power_sgn", "power_sgn_plus_linear", "custom_table")
NOISE_FAMILIES = ("gaussian", "bernoulli")
COVARIATE_FAMILIES = ("truncated_gaussian_unit_ball", "uniform_box")

DEFAULT_REJECTION_CAP = 1000000
DEFAULT_RESAMPLING_CAP = 1000
MAX_REJECTION_BATCH = 1 << 16
MAX_INDEX_NORM = 2.0

# link scales of the three simulation arms, cycled when K > 3
STUDY_SCALES = (0.8, 0.5, 1.5)
STUDY_LINEAR_COEFS = (0.0, 0.1, 0.0)


@dataclass(frozen=True)
class LinkSpec:
    """Monotone link ``f`` of one arm.

    power_sgn:             f(z) = scale * sgn(z) * |z / 2|^beta
    power_sgn_plus_linear: the same plus ``linear_coef * z``
    custom_table:          piecewise-linear interpolant of (table_z, table_f),
                           constant beyond the table ends
    """

    family: str = "power_sgn"
    beta: float = 1.5
    scale: float = 1.0
    linear_coef: float = 0.0
    table_z: Tuple[float, ...] = ()
    table_f: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.family not in LINK_FAMILIES:
            raise ConfigError("unknown link family {!r}".format(self.family), "family")
        if not self.beta > 0:
            raise ConfigError("beta must be positive", "beta")
        if self.family != "power_sgn_plus_linear" and self.linear_coef != 0:
            raise ConfigError("only power_sgn_plus_linear takes a linear term",
                              "linear_coef")
        object.__setattr__(self, "table_z", tuple(float(z) for z in self.table_z))
        object.__setattr__(self, "table_f", tuple(float(f) for f in self.table_f))
        if self.family == "custom_table":
            if len(self.table_z) < 2 or len(self.table_z) != len(self.table_f):
                raise ConfigError("need at least two (z, f) pairs of equal length",
                                  "table_z")
            if np.any(np.diff(self.table_z) <= 0):
                raise ConfigError("table_z must be strictly increasing", "table_z")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.family == "custom_table":
            return np.interp(z, self.table_z, self.table_f)
        value = self.scale * np.sign(z) * np.abs(z / 2.0) ** self.beta
        if self.family == "power_sgn_plus_linear":
            value = value + self.linear_coef * z
        return value

    def to_dict(self):
        out = {"family": self.family, "beta": self.beta, "scale": self.scale,
               "linear_coef": self.linear_coef}
        if self.family == "custom_table":
            out["table_z"] = list(self.table_z)
            out["table_f"] = list(self.table_f)
        return out

    @classmethod
    def from_dict(cls, d, path="link"):
        check_keys(d, ("family", "beta", "scale", "linear_coef", "table_z", "table_f"), path)
        return cls(**d)


@dataclass(frozen=True)
class NoiseSpec:
    family: str = "gaussian"
    variance: float = 0.1

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ConfigError("unknown noise family {!r}".format(self.family), "family")
        if not self.variance >= 0:
            raise ConfigError("variance must be nonnegative", "variance")

    def to_dict(self):
        return {"family": self.family, "variance": self.variance}

    @classmethod
    def from_dict(cls, d, path="noise"):
        check_keys(d, ("family", "variance"), path)
        return cls(**d)


@dataclass(frozen=True)
class CovariateSpec:
    """Law of the covariates. ``low``/``high`` bound each coordinate of the
    uniform box; ``max_attempts`` caps rejection sampling."""

    family: str = "truncated_gaussian_unit_ball"
    dim: int = 4
    low: float = 0.0
    high: float = 1.0
    max_attempts: int = DEFAULT_REJECTION_CAP

    def __post_init__(self):
        if self.family not in COVARIATE_FAMILIES:
            raise ConfigError("unknown covariate family {!r}".format(self.family), "family")
        if self.dim < 1:
            raise ConfigError("dimension must be positive", "dim")
        if self.family == "uniform_box" and not self.low < self.high:
            raise ConfigError("need low < high", "low")
        if self.max_attempts < 1:
            raise ConfigError("max_attempts must be positive", "max_attempts")

    def bounding_box(self):
        if self.family == "truncated_gaussian_unit_ball":
            return -np.ones(self.dim), np.ones(self.dim)
        return np.full(self.dim, float(self.low)), np.full(self.dim, float(self.high))

    def contains(self, X):
        X = np.atleast_2d(X)
        if self.family == "truncated_gaussian_unit_ball":
            return np.linalg.norm(X, axis=1) <= 1.0
        return np.all((X >= self.low) & (X <= self.high), axis=1)

    def to_dict(self):
        out = {"family": self.family, "dim": self.dim}
        if self.family == "uniform_box":
            out.update(low=self.low, high=self.high)
        if self.max_attempts != DEFAULT_REJECTION_CAP:
            out["max_attempts"] = self.max_attempts
        return out

    @classmethod
    def from_dict(cls, d, path="covariate_law"):
        check_keys(d, ("family", "dim", "low", "high", "max_attempts"), path)
        return cls(**d)


@dataclass
class LabeledSample:
    x: np.ndarray
    y: float
    arm: Optional[int] = None
    t: Optional[int] = None


def stack_samples(samples: Sequence[LabeledSample]):
    """Turn a sequence of LabeledSample into ``(X, y)`` arrays."""
    if len(samples) == 0:
        return np.empty((0, 0)), np.empty(0)
    X = np.vstack([np.asarray(s.x, dtype=float) for s in samples])
    y = np.array([s.y for s in samples], dtype=float)
    return X, y


@dataclass(frozen=True, eq=False)
class EnvironmentSpec:
    """A K-armed single-index bandit instance in R^d."""

    d: int
    K: int
    indices: np.ndarray
    links: Tuple[LinkSpec, ...]
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    covariate_law: Optional[CovariateSpec] = None

    def __post_init__(self):
        indices = np.array(self.indices, dtype=float, ndmin=2)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "links", tuple(self.links))
        if self.covariate_law is None:
            object.__setattr__(self, "covariate_law", CovariateSpec(dim=self.d))
        if indices.shape != (self.K, self.d):
            raise ConfigError("indices must be a {} x {} array".format(self.K, self.d),
                              "indices")
        if len(self.links) != self.K:
            raise ConfigError("need one link per arm", "links")
        if np.any(indices[:, 0] != 1.0):
            raise ConfigError("every index vector needs first coordinate exactly 1",
                              "indices")
        if np.any(np.linalg.norm(indices, axis=1) > MAX_INDEX_NORM + 1e-12):
            raise ConfigError("index vectors must have norm at most 2", "indices")
        if self.K <= self.d and np.linalg.matrix_rank(indices) < self.K:
            raise ConfigError("index vectors must be linearly independent", "indices")
        if self.covariate_law.dim != self.d:
            raise ConfigError("covariate dimension does not match d", "covariate_law.dim")

    def true_rewards(self, X):
        """Mean rewards of all arms, shape (n, K). Projections are summed in a
        fixed per-row order, so one row gives the same bits alone or in a
        batch."""
        X = np.atleast_2d(X)
        Z = (X[:, None, :] * self.indices[None, :, :]).sum(axis=2)
        return np.column_stack([link(Z[:, k]) for k, link in enumerate(self.links)])

    def pull(self, arm, n, random_state=None):
        rng = check_random_state(random_state)
        X = sample_covariates(self.covariate_law, n, rng)
        y = draw_rewards(self, np.full(n, arm, dtype=int), X, rng)
        return X, y

    def regret(self, X, arms):
        G = self.true_rewards(X)
        return G.max(axis=1) - G[np.arange(G.shape[0]), arms]

    def to_dict(self):
        return {
            "d": self.d,
            "K": self.K,
            "indices": self.indices.tolist(),
            "links": [link.to_dict() for link in self.links],
            "noise": self.noise.to_dict(),
            "covariate_law": self.covariate_law.to_dict(),
        }

    @classmethod
    def from_dict(cls, d, path="environment.spec"):
        check_keys(d, ("d", "K", "indices", "links", "noise", "covariate_law"), path)
        try:
            links = [LinkSpec.from_dict(link, "{}.links[{}]".format(path, i))
                     for i, link in enumerate(d["links"])]
            return cls(
                d=d["d"],
                K=d["K"],
                indices=np.asarray(d["indices"], dtype=float),
                links=links,
                noise=NoiseSpec.from_dict(d.get("noise", {}), path + ".noise"),
                covariate_law=CovariateSpec.from_dict(
                    d.get("covariate_law", {"dim": d["d"]}), path + ".covariate_law"),
            )
        except KeyError as err:
            raise ConfigError("missing key {}".format(err), path)
        except TypeError as err:
            raise ConfigError(str(err), path)


def sample_covariate(spec: CovariateSpec, random_state=None):
    """One draw from the covariate law. The truncated Gaussian is sampled by
    rejection from N(0, I) until the draw lands in the unit ball."""
    rng = check_random_state(random_state)
    if spec.family == "uniform_box":
        return rng.uniform(spec.low, spec.high, size=spec.dim)
    for _ in range(spec.max_attempts):
        x = rng.standard_normal(spec.dim)
        if np.dot(x, x) <= 1.0:
            return x
    raise BudgetExceededError(
        "no draw inside the unit ball after {} attempts".format(spec.max_attempts))


def sample_covariates(spec: CovariateSpec, n, random_state=None):
    """``n`` draws from the covariate law, shape (n, dim).

    Rejection runs in batches sized from the acceptance rate seen so far.
    ``max_attempts`` bounds the consecutive rejections spent on any single
    draw, as in :func:`sample_covariate`, whatever the value of ``n``.
    """
    rng = check_random_state(random_state)
    if spec.family == "uniform_box":
        return rng.uniform(spec.low, spec.high, size=(n, spec.dim))
    out = np.empty((n, spec.dim))
    filled, attempts, misses = 0, 0, 0
    while filled < n:
        if misses >= spec.max_attempts:
            raise BudgetExceededError(
                "draw {} of {} not inside the unit ball after {} attempts".format(
                    filled + 1, n, misses))
        rate = (filled + 1.0) / (attempts + 2.0)
        batch = int(min(max(np.ceil(1.2 * (n - filled) / rate), 64), MAX_REJECTION_BATCH))
        Z = rng.standard_normal((batch, spec.dim))
        attempts += batch
        hits = np.flatnonzero(np.einsum("ij,ij->i", Z, Z) <= 1.0)[: n - filled]
        if len(hits) == 0:
            misses += batch
            continue
        # rejections spent on each accepted draw
        gaps = np.diff(hits, prepend=-1) - 1
        gaps[0] += misses
        if np.any(gaps >= spec.max_attempts):
            raise BudgetExceededError(
                "draw {} of {} not inside the unit ball after {} attempts".format(
                    filled + int(np.argmax(gaps >= spec.max_attempts)) + 1, n,
                    spec.max_attempts))
        out[filled: filled + len(hits)] = Z[hits]
        filled += len(hits)
        misses = batch - 1 - int(hits[-1])
    return out


def true_reward(spec: EnvironmentSpec, k, x):
    """Mean reward ``f_k(v_k^T x)`` of arm ``k``."""
    return float(spec.true_rewards(np.reshape(x, (1, -1)))[0, k])


def _add_noise(spec, means, rng):
    if spec.noise.family == "bernoulli":
        p = np.clip(means, 0.0, 1.0)
        return (rng.random_sample(np.shape(means)) < p).astype(float)
    return means + np.sqrt(spec.noise.variance) * rng.standard_normal(np.shape(means))


def draw_reward(spec: EnvironmentSpec, k, x, random_state=None):
    rng = check_random_state(random_state)
    return float(_add_noise(spec, true_reward(spec, k, x), rng))


def draw_rewards(spec: EnvironmentSpec, arms, X, random_state=None):
    """Noisy rewards for pulling ``arms[t]`` at covariate ``X[t]``."""
    rng = check_random_state(random_state)
    arms = np.asarray(arms, dtype=int)
    if len(arms) == 0:
        return np.empty(0)
    means = spec.true_rewards(X)[np.arange(len(arms)), arms]
    return _add_noise(spec, means, rng)


def oracle_gap(spec: EnvironmentSpec, x):
    """Best arm, best mean reward and second-best distinct mean reward at
    ``x``. Ties go to the smallest arm index."""
    g = spec.true_rewards(x)[0]
    best = int(np.argmax(g))
    g1 = float(g[best])
    smaller = g[g < g1]
    g2 = float(smaller.max()) if smaller.size else g1
    return best, g1, g2


def oracle_gaps(spec: EnvironmentSpec, X):
    G = spec.true_rewards(X)
    best = np.argmax(G, axis=1)
    g1 = G[np.arange(G.shape[0]), best]
    below = np.where(G < g1[:, None], G, -np.inf)
    g2 = below.max(axis=1)
    g2 = np.where(np.isfinite(g2), g2, g1)
    return best, g1, g2


def study_links(K, beta, link_family="study"):
    """Links of the simulation study: 0.8 and 1.5 times the signed power and
    0.5 times it plus 0.1 z, cycled over the arms."""
    links = []
    for k in range(K):
        scale = STUDY_SCALES[k % len(STUDY_SCALES)]
        if link_family == "power_sgn":
            coef = 0.0
        elif link_family == "power_sgn_plus_linear":
            coef = 0.1
        elif link_family == "study":
            coef = STUDY_LINEAR_COEFS[k % len(STUDY_LINEAR_COEFS)]
        else:
            raise ConfigError("unknown link family {!r}".format(link_family), "link_family")
        family = "power_sgn_plus_linear" if coef else "power_sgn"
        links.append(LinkSpec(family=family, beta=beta, scale=scale, linear_coef=coef))
    return links


def generate_environment(seed, d=4, K=3, beta=1.5, link_family="study",
                         noise_family="gaussian", noise_variance=0.1,
                         max_attempts=DEFAULT_RESAMPLING_CAP):
    """Random environment in the style of the simulation study.

    Index vectors are ``(1, u)`` with ``u`` uniform in the ball of radius
    sqrt(3), so that ``||v||_2 <= 2``; draws are repeated until the stacked
    index matrix has full rank.
    """
    if d < 2 or K < 1:
        raise ConfigError("need d >= 2 and K >= 1")
    rng = check_random_state(seed)
    radius = np.sqrt(MAX_INDEX_NORM ** 2 - 1.0)
    for attempt in range(max_attempts):
        direction = rng.standard_normal((K, d - 1))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        r = radius * rng.random_sample(K) ** (1.0 / (d - 1))
        indices = np.column_stack([np.ones(K), direction * r[:, None]])
        if np.linalg.matrix_rank(indices) == min(K, d):
            break
    else:
        raise BudgetExceededError(
            "no linearly independent index draw after {} attempts".format(max_attempts))
    logger.debug("environment drawn after %d attempt(s)", attempt + 1)
    return EnvironmentSpec(
        d=d,
        K=K,
        indices=indices,
        links=study_links(K, beta, link_family),
        noise=NoiseSpec(family=noise_family,
                        variance=noise_variance if noise_family == "gaussian" else 0.0),
        covariate_law=CovariateSpec(family="truncated_gaussian_unit_ball", dim=d),
    )
