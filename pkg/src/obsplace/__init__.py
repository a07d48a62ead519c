"""Observability-driven sensor placement for hyper-parameterized linear
Bayesian inverse problems."""

from .bayes import GaussianPrior, PosteriorGaussian, assemble_ptg, map_objective, posterior
from .greedy import (
    GreedyConfig,
    SensorSet,
    chebyshev_reference,
    evaluate_sensor_set,
    evaluate_sensor_sets,
    random_baseline,
    random_inflow_baseline,
    run_greedy,
)
from .model import HyperParameterDomain, Model, legendre, sample_hyper_grid
from .observability import (
    observability_beta,
    observability_beta_pair,
    eta_bounds,
    kernel_subspace,
    rb_beta_lower_bound,
)
from .reduced_basis import RBSpace, beta_rb, beta_rb_pair, build_rb
from .sensors import ObservationOperator, SensorLibrary, build_library, gamma_L
from .thermal import ThermalBlockConfig, assemble_thermal_block

__all__ = [
    "GaussianPrior",
    "PosteriorGaussian",
    "assemble_ptg",
    "map_objective",
    "posterior",
    "GreedyConfig",
    "SensorSet",
    "chebyshev_reference",
    "evaluate_sensor_set",
    "evaluate_sensor_sets",
    "random_baseline",
    "random_inflow_baseline",
    "run_greedy",
    "HyperParameterDomain",
    "Model",
    "legendre",
    "sample_hyper_grid",
    "observability_beta",
    "observability_beta_pair",
    "eta_bounds",
    "kernel_subspace",
    "rb_beta_lower_bound",
    "RBSpace",
    "beta_rb",
    "beta_rb_pair",
    "build_rb",
    "ObservationOperator",
    "SensorLibrary",
    "build_library",
    "gamma_L",
    "ThermalBlockConfig",
    "assemble_thermal_block",
]

__version__ = "0.1.0"
