"""Unbiased particle estimators of the normalizing constant of Zakai's equation.

Particle filters, coupled particle filters, multilevel particle filters and
randomized single-term / coupled-sum debiasing for partially observed
diffusions, with an exact Kalman oracle for the linear-Gaussian case.
"""
from ._backend import backend_name, compiled_available, set_backend
from .errors import (ConfigurationError, DegeneracyError, LevelError, ResolutionError, ShapeError,
                     UnsupportedModelError, ZakaiError)
from .estimators import (LevelDistribution, UnbiasedSpec, allocate_levels, cs_estimate, make_level_distribution,
                         mlpf_run, replicate_average, st_estimate)
from .euler import coupled_euler_block, euler_block
from .filters import ResamplingPolicy, cpf_run, pf_run
from .harness import ExperimentConfig, benchmark, ground_truth, loglog_slope
from .models import MODEL_NAMES, SdeModel, builtin_model, custom_model
from .observations import ObservationPath, load_path_csv, save_path_csv, simulate_observation_path
from .oracle import kalman_log_gamma, linear_gaussian_spec, oracle_gamma
from .resampling import ess, maximal_coupling_indices, multinomial_indices, normalize

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DegeneracyError", "ExperimentConfig", "LevelDistribution", "LevelError",
    "MODEL_NAMES", "ObservationPath", "ResamplingPolicy", "ResolutionError", "SdeModel", "ShapeError",
    "UnbiasedSpec", "UnsupportedModelError", "ZakaiError", "allocate_levels", "backend_name", "benchmark",
    "builtin_model", "compiled_available", "coupled_euler_block", "cpf_run", "cs_estimate", "custom_model",
    "ess", "euler_block", "ground_truth", "kalman_log_gamma", "linear_gaussian_spec", "load_path_csv",
    "loglog_slope", "make_level_distribution", "maximal_coupling_indices", "mlpf_run", "multinomial_indices",
    "normalize", "oracle_gamma", "pf_run", "replicate_average", "save_path_csv", "set_backend",
    "simulate_observation_path", "st_estimate",
]
