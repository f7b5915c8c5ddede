import numpy as np
import pytest

from selectlik import ModelParams, SelectionSteps, SimulationConfig, sample_hedges


@pytest.fixture(scope="session")
def step_setup():
    """The three-band setup used throughout: censoring strengthens with p."""
    return SelectionSteps(cuts=(0.0, 0.025, 0.05, 1.0), weights=(1.0, 0.6, 0.1))


@pytest.fixture(scope="session")
def uncensored():
    return SelectionSteps(cuts=(0.0, 1.0), weights=(1.0,))


@pytest.fixture(scope="session")
def censored_dataset(step_setup):
    """A reproducible censored meta-analysis of 20 small-sigma studies."""
    params = ModelParams(theta0=0.5, tau=0.2, steps=step_setup)
    config = SimulationConfig(params=params, sigmas=(0.25,) * 20, seed=1)
    return sample_hedges(config)


def make_dataset(theta0, tau, sigma, n, seed, steps):
    params = ModelParams(theta0=theta0, tau=tau, steps=steps)
    return sample_hedges(SimulationConfig(params=params, sigmas=(sigma,) * n, seed=seed))
