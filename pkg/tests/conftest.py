import numpy as np
import pytest

from obsplace import ThermalBlockConfig, assemble_thermal_block, sample_hyper_grid
from obsplace.bayes import GaussianPrior
from obsplace.reduced_basis import build_rb
from obsplace.sensors import build_library


@pytest.fixture(scope="session")
def model17():
    return assemble_thermal_block(ThermalBlockConfig(mesh_n=17))


@pytest.fixture(scope="session")
def model33():
    return assemble_thermal_block(ThermalBlockConfig(mesh_n=33))


@pytest.fixture(scope="session")
def lib33(model33):
    return build_library(13, (0.02, 0.98), 0.04, model33)


@pytest.fixture(scope="session")
def lib33_id(model33):
    return build_library(13, (0.02, 0.98), 0.04, model33, noise_mode="identity")


@pytest.fixture(scope="session")
def prior4():
    return GaussianPrior.standard([1.0, 0.0, 0.0, 0.0])


@pytest.fixture(scope="session")
def xi55(model33):
    return sample_hyper_grid(model33.hyper_domain, 5, log_scale=True)


@pytest.fixture(scope="session")
def rb33(model33, lib33, xi55):
    rb, _ = build_rb(model33, xi55, 0.01, library=lib33)
    return rb


def random_theta(rng, domain):
    return np.exp(rng.uniform(np.log(domain.lower), np.log(domain.upper)))


def random_operator(rng, library, k_min=3, k_max=8):
    from obsplace.sensors import ObservationOperator

    k = int(rng.integers(k_min, k_max + 1))
    idx = rng.choice(library.size, size=k, replace=False)
    return ObservationOperator(library, sorted(int(i) for i in idx))
