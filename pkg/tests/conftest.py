import numpy as np
import pytest

from rovftc.scenario import scenario_from_dict


@pytest.fixture(scope="session")
def default_scenario():
    """Scenario built entirely from the packaged defaults."""
    return scenario_from_dict({}, name="defaults")


@pytest.fixture(scope="session")
def params(default_scenario):
    return default_scenario.params


@pytest.fixture(scope="session")
def geom(default_scenario):
    return default_scenario.geometry


@pytest.fixture(scope="session")
def gains(default_scenario):
    return default_scenario.gains


@pytest.fixture(scope="session")
def fdi_cfg(default_scenario):
    return default_scenario.fdi


@pytest.fixture()
def bank(default_scenario):
    return default_scenario.bank.copy()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
