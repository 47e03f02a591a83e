import logging

import numpy as np
import pytest

from gfra_sic.model.baselines import (
    aloha_matrix,
    clamp_to_box,
    cyclic_power_assignment,
    greedy_allocation,
    structured_power_levels,
)


class TestPowerLevels:
    def test_doubling_ladder(self):
        assert structured_power_levels([0.8, 0.5], 6.0) == pytest.approx([0.8, 1.6, 3.2])

    def test_truncated(self):
        assert structured_power_levels([0.8, 0.5], 6.0, 2) == pytest.approx([0.8, 1.6])

    def test_first_level_above_pmax(self):
        with pytest.raises(ValueError, match="exceeds p_max"):
            structured_power_levels([7.0], 6.0)

    def test_single_level(self):
        assert structured_power_levels([4.0], 6.0) == [4.0]


class TestAloha:
    def test_uniform_rows(self):
        np.testing.assert_allclose(np.asarray(aloha_matrix(3, 4)), 0.25)

    def test_cyclic_assignment(self):
        power = cyclic_power_assignment([1.0, 2.0], 5, np.full(5, 0.5), 6.0)
        np.testing.assert_array_equal(power.p, [1.0, 2.0, 1.0, 2.0, 1.0])

    def test_no_levels(self):
        with pytest.raises(ValueError):
            cyclic_power_assignment([], 3, np.full(3, 0.5), 6.0)


class TestGreedy:
    def test_two_levels(self):
        p = [0.08, 0.12, 0.33, 0.35, 0.38]
        alloc, power = greedy_allocation(p, 2, [1.0, 2.0], np.full(5, 0.5), 6.0)
        expected = np.array([[1, 0], [1, 0], [1, 0], [1, 0], [0, 1]], dtype=float)
        np.testing.assert_array_equal(np.asarray(alloc), expected)
        np.testing.assert_array_equal(power.p, [2.0, 2.0, 2.0, 1.0, 1.0])

    def test_three_levels(self):
        p = np.linspace(0.1, 0.8, 8)
        alloc, power = greedy_allocation(p, 3, [1.0, 2.0, 4.0], np.full(8, 0.5), 6.0)
        a = np.asarray(alloc)
        # most probable block on the identity at the lowest level
        np.testing.assert_array_equal(a[5:], np.eye(3))
        np.testing.assert_array_equal(power.p[5:], 1.0)
        np.testing.assert_array_equal(a[2:5], np.eye(3))
        np.testing.assert_array_equal(power.p[2:5], 2.0)
        np.testing.assert_array_equal(a[:2, 0], 1.0)
        np.testing.assert_array_equal(power.p[:2], 4.0)

    def test_single_level_shares_one_slot(self):
        alloc, power = greedy_allocation([0.1, 0.2, 0.3], 2, [1.5], np.full(3, 0.5), 6.0)
        np.testing.assert_array_equal(np.asarray(alloc)[:, 0], 1.0)
        np.testing.assert_array_equal(power.p, 1.5)

    def test_too_few_devices(self):
        with pytest.raises(ValueError, match=r"\(J-1\)\*K"):
            greedy_allocation([0.1, 0.2, 0.3], 2, [1.0, 2.0, 4.0], np.full(3, 0.5), 6.0)

    def test_unsorted_activity(self):
        with pytest.raises(ValueError, match="sorted"):
            greedy_allocation([0.5, 0.1], 1, [1.0, 2.0], np.full(2, 0.5), 6.0)


def test_clamp_is_logged(caplog):
    with caplog.at_level(logging.WARNING, logger="gfra_sic.model.baselines"):
        power = clamp_to_box([0.2, 3.0], np.array([0.5, 0.5]), 6.0, name="aloha_structured")
    np.testing.assert_array_equal(power.p, [0.5, 3.0])
    assert "clamped devices [0]" in caplog.text
