import numpy as np
import pytest

from gfra_sic.data.config import builtin_scenario
from gfra_sic.model.system import ChannelMatrix, power_box, sample_channel


@pytest.fixture
def make_scenario():
    """Scenario factory built on the defaults of built-in scenario 1."""

    def _make(n_devices=5, n_slots=2, activity=None, **overrides):
        if activity is None:
            activity = np.round(np.linspace(0.2, 0.6, n_devices), 3).tolist()
        return builtin_scenario("1").update(
            n_devices=n_devices, n_slots=n_slots, activity=list(activity), **overrides
        )

    return _make


@pytest.fixture
def feasible_channel():
    """Draws channels until every device can reach the threshold within p_max."""

    def _draw(scenario, rng) -> ChannelMatrix:
        while True:
            channel = sample_channel(scenario.n_devices, scenario.n_antennas, rng)
            try:
                power_box(scenario, channel)
            except ValueError:
                continue
            return channel

    return _draw


@pytest.fixture
def random_point():
    """Random row-stochastic A and a power vector inside the box."""

    def _point(scenario, channel, rng):
        p_min = power_box(scenario, channel)
        e = rng.exponential(size=(scenario.n_devices, scenario.n_slots))
        alloc = e / e.sum(axis=1, keepdims=True)
        power = rng.uniform(p_min, scenario.p_max)
        return alloc, power

    return _point
