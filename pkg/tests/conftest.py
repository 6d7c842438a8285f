"""
Shared fixtures: built-in scenario configs and their (cached) runs
"""

import pytest

from src.cli.runner import execute_run
from src.config.scenario_config import build_scenario, load_builtin, with_overrides


@pytest.fixture(scope="session")
def scenario1_config():
    return load_builtin("scenario1")


@pytest.fixture(scope="session")
def scenario2_config():
    return load_builtin("scenario2")


@pytest.fixture(scope="session")
def short_scenario1(scenario1_config):
    """Scenario 1 cut to 3 s, for structural checks"""
    return build_scenario(with_overrides(scenario1_config, {"simulation.t_end": 3.0}))


@pytest.fixture(scope="session")
def scenario1_outcome(scenario1_config):
    return execute_run(scenario1_config)


@pytest.fixture(scope="session")
def scenario2_outcome(scenario2_config):
    return execute_run(scenario2_config)
