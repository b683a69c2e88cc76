import pytest

import spidersim as ss
from spidersim.data import marine_ranch_requirement_text, marine_ranch_scenario_text
from spidersim.exports import parse_requirement


@pytest.fixture(scope="session")
def registry():
    return ss.built_in_registry()


@pytest.fixture(scope="session")
def marine_spec():
    return ss.parse_scenario(marine_ranch_scenario_text())


@pytest.fixture(scope="session")
def marine_topology(marine_spec):
    return marine_spec.scenario_parameters.explicit_topology


@pytest.fixture(scope="session")
def marine_requirement():
    return parse_requirement(marine_ranch_requirement_text())
