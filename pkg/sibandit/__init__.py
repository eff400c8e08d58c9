from sibandit import estimation

from sibandit.environment import EnvironmentSpec, generate_environment
from sibandit.estimation import SingleIndexRegressor, fit_sireg, maximize_mrc
from sibandit.bandit import build_schedule, run_single_index
from sibandit.baseline import run_smoothbandit
from sibandit.smoothness import estimate_smoothness, run_adaptive
from sibandit.harness import ExperimentRunner, run_experiment, simulation_preset

from sibandit.version import __version__, __commit__, base_version

__all__ = [
    "estimation",
    "EnvironmentSpec",
    "generate_environment",
    "SingleIndexRegressor",
    "fit_sireg",
    "maximize_mrc",
    "build_schedule",
    "run_single_index",
    "run_smoothbandit",
    "estimate_smoothness",
    "run_adaptive",
    "ExperimentRunner",
    "run_experiment",
    "simulation_preset",
    "__version__",
]
