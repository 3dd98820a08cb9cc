from __future__ import annotations

import pytest

from bcslab.discretize import build_grid
from bcslab.models import ThermoParams
from bcslab.potential import gaussian, two_gaussian


@pytest.fixture
def deep_gaussian():
    """The standard attractive test well, strong enough for T_c well above the floor."""
    return gaussian(5.0, 1.0)


@pytest.fixture
def weak_gaussian():
    return gaussian(0.2, 1.0)


@pytest.fixture
def two_well():
    """Attractive core with a repulsive tail; V changes sign near r = 2.478."""
    return two_gaussian(5.0, 1.0, -0.5, 2.0)


@pytest.fixture
def small_grid():
    return build_grid(n_per_panel=8, mu=1.0, grading_levels=4)


@pytest.fixture
def grid():
    return build_grid(mu=1.0)


@pytest.fixture
def warm():
    return ThermoParams.from_temperature(0.5, 1.0)


@pytest.fixture
def cold():
    return ThermoParams.from_temperature(0.0, 1.0)
