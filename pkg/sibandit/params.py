import copy
import json
import math
from pathlib import Path
from typing import List, Optional, TypedDict, Union

from .exceptions import ConfigError

ALGORITHMS = ("single_index", "smooth_bandit", "adaptive")


class MrcParams(TypedDict):
    bound: float
    population_size: Optional[int]
    max_generations: int
    restarts: int
    seed: int
    subsample_cap: Optional[int]
    mutation: float
    recombination: float
    tol: float
    n_jobs: int


class BaselineParams(TypedDict):
    C_T: Optional[float]
    c_eps: float
    c_h: float
    c_conf: float


class Constants(TypedDict):
    beta: Optional[float]
    beta_lo: Optional[float]
    beta_hi: Optional[float]
    C_T: Optional[float]
    c_eps: float
    C_H: float
    C_gap: float
    C_l: float
    B_v: float
    cross_fit: bool
    clamp_predictions: bool
    min_fit_samples: Optional[int]
    mrc: MrcParams
    baseline: BaselineParams
    misspecified_betas: List[float]


class GeneratorParams(TypedDict):
    seed: Optional[int]
    d: int
    K: int
    beta: Optional[float]
    link_family: str
    noise_family: str
    noise_variance: float


class ExperimentConfig(TypedDict):
    seed: int
    trials: int
    horizon: int
    algorithm: str
    environment: dict
    constants: Constants
    output: Union[str, Path]
    checkpoint_stride: int
    n_jobs: int
    verbose: bool


DEFAULT_MRC_PARAMS: MrcParams = {
    "bound": 2.0,
    "population_size": None,  # 15 * (d - 1)
    "max_generations": 200,
    "restarts": 2,
    "seed": 0,
    "subsample_cap": None,
    "mutation": 0.7,
    "recombination": 0.9,
    "tol": 0.01,
    "n_jobs": 1,
}

DEFAULT_BASELINE_PARAMS: BaselineParams = {
    "C_T": None,
    "c_eps": 0.5,
    "c_h": 1.0,
    "c_conf": 2.0 * math.sqrt(2.0),
}

DEFAULT_CONSTANTS: Constants = {
    "beta": None,
    "beta_lo": None,
    "beta_hi": None,
    "C_T": None,  # calibrated so that the first epoch fits in a quarter of the horizon
    "c_eps": 0.5,
    "C_H": 1.0,
    "C_gap": 1.0,
    "C_l": 1.0,
    "B_v": 2.0,
    "cross_fit": False,
    "clamp_predictions": False,
    "min_fit_samples": None,
    "mrc": DEFAULT_MRC_PARAMS,
    "baseline": DEFAULT_BASELINE_PARAMS,
    "misspecified_betas": [],
}

DEFAULT_GENERATOR_PARAMS: GeneratorParams = {
    "seed": None,
    "d": 4,
    "K": 3,
    "beta": None,
    "link_family": "study",
    "noise_family": "gaussian",
    "noise_variance": 0.1,
}

DEFAULT_CONFIG: ExperimentConfig = {
    "seed": 0,
    "trials": 1,
    "horizon": 12000,
    "algorithm": "single_index",
    "environment": {"generator": DEFAULT_GENERATOR_PARAMS},
    "constants": DEFAULT_CONSTANTS,
    "output": "sibandit_results",
    "checkpoint_stride": 100,
    "n_jobs": 1,
    "verbose": False,
}


def _where(path, key):
    return "{}.{}".format(path, key) if path else key


def check_keys(block, allowed, path):
    if not isinstance(block, dict):
        raise ConfigError("expected an object, got {}".format(type(block).__name__), path)
    for key in block:
        if key not in allowed:
            raise ConfigError("unknown key", _where(path, key))


def merge_params(defaults, user, path=""):
    """Deep-merge ``user`` over a copy of ``defaults``. Nested dictionaries
    in the defaults are merged recursively, keys absent from the defaults
    are rejected."""
    merged = copy.deepcopy(defaults)
    if user is None:
        return merged
    check_keys(user, defaults, path)
    for key, value in user.items():
        where = _where(path, key)
        if isinstance(defaults[key], dict) and defaults[key]:
            merged[key] = merge_params(defaults[key], value, where)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _require(condition, message, field):
    if not condition:
        raise ConfigError(message, field)


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value):
    return (isinstance(value, (int, float)) and not isinstance(value, bool)
            and math.isfinite(value))


def _positive_number(block, key, path, allow_none=False):
    value = block[key]
    if allow_none and value is None:
        return
    _require(_is_number(value) and value > 0, "must be a positive number",
             _where(path, key))


def _positive_int(block, key, path, allow_none=False):
    value = block[key]
    if allow_none and value is None:
        return
    _require(_is_int(value) and value > 0, "must be a positive integer",
             _where(path, key))


def validate_mrc_params(params, path="constants.mrc"):
    params = merge_params(DEFAULT_MRC_PARAMS, params, path)
    _positive_number(params, "bound", path)
    _require(params["bound"] >= 1.0, "search bound below 1 leaves no index with v_1 = 1",
             path + ".bound")
    _positive_int(params, "population_size", path, allow_none=True)
    if params["population_size"] is not None:
        _require(params["population_size"] >= 4,
                 "differential evolution needs at least 4 members",
                 path + ".population_size")
    _positive_int(params, "max_generations", path)
    _positive_int(params, "restarts", path)
    _require(_is_int(params["seed"]), "must be an integer", path + ".seed")
    _positive_int(params, "subsample_cap", path, allow_none=True)
    _positive_number(params, "mutation", path)
    _require(_is_number(params["recombination"]) and 0 <= params["recombination"] <= 1,
             "must lie in [0, 1]", path + ".recombination")
    _require(_is_number(params["tol"]) and params["tol"] >= 0, "must be nonnegative",
             path + ".tol")
    _require(_is_int(params["n_jobs"]) and params["n_jobs"] != 0,
             "must be a nonzero integer", path + ".n_jobs")
    return params


def validate_constants(constants, algorithm, path="constants"):
    constants = merge_params(DEFAULT_CONSTANTS, constants, path)
    has_beta = constants["beta"] is not None
    has_range = constants["beta_lo"] is not None or constants["beta_hi"] is not None
    if algorithm == "adaptive":
        _require(not has_beta, "the adaptive algorithm estimates beta, give beta_lo/beta_hi",
                 path + ".beta")
        _require(constants["beta_lo"] is not None and constants["beta_hi"] is not None,
                 "beta_lo and beta_hi are required", path + ".beta_lo")
        _positive_number(constants, "beta_lo", path)
        _positive_number(constants, "beta_hi", path)
        _require(constants["beta_lo"] < 1 < constants["beta_hi"],
                 "need beta_lo < 1 < beta_hi", path + ".beta_hi")
    else:
        _require(has_beta, "beta is required for " + algorithm, path + ".beta")
        _require(not has_range, "beta_lo/beta_hi only apply to the adaptive algorithm",
                 path + ".beta_lo")
        _positive_number(constants, "beta", path)
    _positive_number(constants, "C_T", path, allow_none=True)
    _positive_number(constants, "c_eps", path)
    _require(constants["c_eps"] <= 0.6, "must lie in (0, 0.6]", path + ".c_eps")
    for key in ("C_H", "C_gap", "C_l"):
        _require(_is_number(constants[key]) and constants[key] >= 0, "must be nonnegative",
                 _where(path, key))
    _positive_number(constants, "B_v", path)
    for key in ("cross_fit", "clamp_predictions"):
        _require(isinstance(constants[key], bool), "must be true or false",
                 _where(path, key))
    _positive_int(constants, "min_fit_samples", path, allow_none=True)
    constants["mrc"] = validate_mrc_params(constants["mrc"], path + ".mrc")
    constants["mrc"]["bound"] = constants["B_v"]
    base = constants["baseline"]
    bpath = path + ".baseline"
    _positive_number(base, "C_T", bpath, allow_none=True)
    for key in ("c_eps", "c_h", "c_conf"):
        _positive_number(base, key, bpath)
    betas = constants["misspecified_betas"]
    _require(isinstance(betas, list) and all(_is_number(b) and b > 0 for b in betas),
             "must be a list of positive numbers", path + ".misspecified_betas")
    _require(not betas or algorithm == "single_index",
             "only the single_index algorithm takes misspecified betas",
             path + ".misspecified_betas")
    return constants


def validate_generator(params, path="environment.generator"):
    params = merge_params(DEFAULT_GENERATOR_PARAMS, params, path)
    if params["seed"] is not None:
        _require(_is_int(params["seed"]), "must be an integer", path + ".seed")
    _require(_is_int(params["d"]) and params["d"] >= 2, "must be an integer >= 2", path + ".d")
    _require(_is_int(params["K"]) and params["K"] >= 1, "must be a positive integer",
             path + ".K")
    _positive_number(params, "beta", path, allow_none=True)
    _require(params["link_family"] in ("study", "power_sgn", "power_sgn_plus_linear"),
             "unknown link family", path + ".link_family")
    _require(params["noise_family"] in ("gaussian", "bernoulli"), "unknown noise family",
             path + ".noise_family")
    _require(_is_number(params["noise_variance"]) and params["noise_variance"] >= 0,
             "must be nonnegative", path + ".noise_variance")
    return params


def validate_config(config):
    """Check an experiment configuration against the schema and return a
    fully populated copy. Raises ConfigError naming the offending field."""
    _require(isinstance(config, dict), "the configuration must be a JSON object", None)
    check_keys(config, DEFAULT_CONFIG, "")
    merged = copy.deepcopy(DEFAULT_CONFIG)
    merged.update({k: copy.deepcopy(v) for k, v in config.items()
                   if k not in ("environment", "constants")})

    _require(_is_int(merged["seed"]), "must be an integer", "seed")
    _positive_int(merged, "trials", "")
    _require(_is_int(merged["horizon"]) and merged["horizon"] >= 0,
             "must be a nonnegative integer", "horizon")
    _require(merged["algorithm"] in ALGORITHMS,
             "must be one of " + ", ".join(ALGORITHMS), "algorithm")
    _require(isinstance(merged["output"], (str, Path)), "must be a path", "output")
    _positive_int(merged, "checkpoint_stride", "")
    _require(_is_int(merged["n_jobs"]) and merged["n_jobs"] != 0,
             "must be a nonzero integer", "n_jobs")
    _require(isinstance(merged["verbose"], bool), "must be true or false", "verbose")

    merged["constants"] = validate_constants(config.get("constants"), merged["algorithm"])

    env = config.get("environment", DEFAULT_CONFIG["environment"])
    check_keys(env, ("generator", "spec"), "environment")
    _require(("generator" in env) != ("spec" in env),
             "give exactly one of generator or spec", "environment")
    if "generator" in env:
        generator = validate_generator(env["generator"])
        if generator["beta"] is None:
            _require(merged["constants"]["beta"] is not None,
                     "the true beta is required when the algorithm does not know it",
                     "environment.generator.beta")
            generator["beta"] = merged["constants"]["beta"]
        if generator["seed"] is None:
            generator["seed"] = merged["seed"]
        merged["environment"] = {"generator": generator}
    else:
        _require(isinstance(env["spec"], dict), "must be an object", "environment.spec")
        merged["environment"] = {"spec": copy.deepcopy(env["spec"])}
    return merged


def read_config_document(path):
    """The raw JSON document at ``path``, before validation."""
    try:
        with open(path, "r") as f:
            return json.load(f)
    except json.JSONDecodeError as err:
        raise ConfigError("not valid JSON ({})".format(err))
    except OSError as err:
        raise ConfigError("cannot read configuration ({})".format(err))


def load_config(path):
    return validate_config(read_config_document(path))
