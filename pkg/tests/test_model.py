import numpy as np
import pytest
from pydantic import ValidationError

from gfra_sic.data.config import (
    ExperimentConfig,
    Scenario,
    builtin_scenario,
    builtin_scenarios,
    load_config,
    resolve_scenario,
)
from gfra_sic.model.system import (
    ActivityVector,
    AllocationMatrix,
    ChannelMatrix,
    PowerVector,
    compute_pmin,
    power_box,
    sample_activity,
    sample_channel,
)
from gfra_sic.utils.rng import CellStreams


class TestScenario:
    def test_builtin_scenario_3(self):
        scenario = builtin_scenario(3)
        assert scenario.n_devices == 8
        assert scenario.n_slots == 3
        np.testing.assert_allclose(scenario.p, [0.10, 0.12, 0.37, 0.41, 0.41, 0.41, 0.42, 0.45])

    def test_builtin_scenario_2_total_activity(self):
        assert builtin_scenario("2").p.sum() == pytest.approx(2.59)

    def test_builtin_defaults(self):
        scenarios = builtin_scenarios()
        assert [s.n_devices for s in scenarios] == [5, 5, 8, 8]
        assert [s.n_slots for s in scenarios] == [2, 2, 3, 3]
        for s in scenarios:
            assert np.all(np.diff(s.p) >= 0)
            assert (s.n_antennas, s.sharpness, s.step_size, s.p_max) == (2, 10.0, 0.01, 6.0)
            assert (s.n_frames, s.l1_weight) == (100_000, 0.001)

    def test_unsorted_activity_rejected(self, make_scenario):
        with pytest.raises(ValidationError, match="sorted"):
            make_scenario(n_devices=3, activity=[0.5, 0.2, 0.7])

    def test_activity_length_must_match(self):
        with pytest.raises(ValidationError):
            builtin_scenario("1").update(n_devices=4)

    def test_activity_out_of_range(self, make_scenario):
        with pytest.raises(ValidationError):
            make_scenario(n_devices=2, activity=[0.2, 1.5])

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="Unknown scenario parameter"):
            builtin_scenario("1").update(bandwidth=1.0)
        data = builtin_scenario("1").as_dict()
        data["bandwidth"] = 1.0
        with pytest.raises(ValidationError):
            Scenario.model_validate(data)

    def test_json_file(self, tmp_path):
        scenario = builtin_scenario("4")
        path = tmp_path / "custom.json"
        scenario.to_json_file(path)
        scenario_id, loaded = resolve_scenario(str(path))
        assert scenario_id == "custom"
        assert loaded == scenario

    def test_resolve_unknown(self):
        with pytest.raises(ValueError, match="neither a built-in id"):
            resolve_scenario("does/not/exist.json")


class TestDomainTypes:
    def test_allocation_rows_must_sum_to_one(self):
        AllocationMatrix([[0.5, 0.5], [1.0, 0.0]])
        with pytest.raises(ValueError, match="sum to 1"):
            AllocationMatrix([[0.5, 0.6]])
        with pytest.raises(ValueError, match="nonnegative"):
            AllocationMatrix([[1.5, -0.5]])

    def test_power_box(self):
        PowerVector([1.0, 2.0], [0.5, 0.5], 6.0)
        with pytest.raises(ValueError, match="outside the box"):
            PowerVector([7.0], [0.5], 6.0)
        with pytest.raises(ValueError, match="infeasible power box"):
            PowerVector([7.0], [7.0], 6.0)

    def test_activity_flags(self):
        x = ActivityVector([0, 1, 1])
        np.testing.assert_array_equal(x.active, [1, 2])
        with pytest.raises(ValueError):
            ActivityVector([0, 2])

    def test_types_are_immutable(self):
        alloc = AllocationMatrix([[1.0]])
        with pytest.raises(ValueError):
            alloc.a[0, 0] = 0.5


class TestChannel:
    def test_pmin_example(self):
        channel = ChannelMatrix.from_array(np.array([[1.0], [1.0]]))
        np.testing.assert_allclose(compute_pmin(channel, 1.0, 1.0, 0.01), [0.505])

    def test_zero_column_rejected(self):
        channel = ChannelMatrix.from_array(np.array([[1.0, 0.0], [0.0, 0.0]]))
        with pytest.raises(ValueError, match="re-draw"):
            compute_pmin(channel, 1.0, 1.0, 0.01)

    def test_infeasible_scenario(self, make_scenario):
        scenario = make_scenario(n_devices=1, activity=[0.5])
        weak = ChannelMatrix.from_array(np.array([[0.1], [0.1]]))
        with pytest.raises(ValueError, match="infeasible scenario"):
            power_box(scenario, weak)

    def test_cross_gain(self):
        h = np.array([[1.0, 1.0], [0.0, 1.0j]])
        channel = ChannelMatrix.from_array(h)
        np.testing.assert_allclose(channel.squared_norms, [1.0, 2.0])
        # |h_0^H h_1|^2 = 1, |h_1^H h_1|^2 = 4
        np.testing.assert_allclose(channel.cross_gain, [[1.0, 1.0], [0.25, 1.0]])

    def test_channel_statistics(self):
        channel = sample_channel(2000, 2, np.random.default_rng(0))
        assert np.mean(np.abs(channel.h) ** 2) == pytest.approx(1.0, abs=0.05)
        assert abs(np.mean(channel.h)) < 0.05

    def test_channel_is_circular(self):
        h = sample_channel(2000, 2, np.random.default_rng(1)).h.ravel()
        product = h.real * h.imag
        assert abs(product.mean()) <= 3 * product.std(ddof=1) / np.sqrt(product.size)
        np.testing.assert_allclose([np.var(h.real), np.var(h.imag)], 0.5, atol=0.04)

    def test_channel_reproducible(self):
        a = sample_channel(5, 2, np.random.default_rng(7))
        b = sample_channel(5, 2, np.random.default_rng(7))
        np.testing.assert_array_equal(a.h, b.h)


class TestActivitySampling:
    def test_degenerate_probabilities(self):
        x = sample_activity([0.0, 1.0], np.random.default_rng(1))
        np.testing.assert_array_equal(np.asarray(x), [0, 1])

    def test_empirical_mean(self):
        rng = np.random.default_rng(3)
        p = np.array([0.1, 0.5, 0.9])
        draws = np.array([np.asarray(sample_activity(p, rng)) for _ in range(20000)])
        np.testing.assert_allclose(draws.mean(axis=0), p, atol=0.02)

    def test_frames_are_uncorrelated(self):
        rng = np.random.default_rng(4)
        p = np.array([0.2, 0.5, 0.8])
        n_frames = 20000
        draws = np.array([np.asarray(sample_activity(p, rng)) for _ in range(n_frames)])
        for i in range(p.size):
            lag1 = np.corrcoef(draws[:-1, i], draws[1:, i])[0, 1]
            assert abs(lag1) < 3 / np.sqrt(n_frames)


class TestStreams:
    def test_cells_are_reproducible_and_distinct(self):
        a = CellStreams.from_seed(11, 0)
        b = CellStreams.from_seed(11, 0)
        c = CellStreams.from_seed(11, 1)
        np.testing.assert_array_equal(a.channel().random(4), b.channel().random(4))
        assert not np.array_equal(a.channel().random(4), c.channel().random(4))
        assert not np.array_equal(a.channel().random(4), a.activity().random(4))

    def test_fresh_generator_per_call(self):
        streams = CellStreams.from_seed(5)
        np.testing.assert_array_equal(streams.activity().random(3), streams.activity().random(3))


class TestExperimentConfig:
    def test_defaults(self):
        config = ExperimentConfig()
        assert config.n_seeds == 10
        assert [sid for sid, _ in config.resolved_scenarios()] == ["1", "2", "3", "4"]

    def test_unknown_method(self):
        with pytest.raises(ValueError, match="Unknown methods"):
            ExperimentConfig(methods=["alg3"])

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="Unknown configuration parameter"):
            ExperimentConfig().update(n_seed=3)

    def test_scenario_overrides(self):
        config = ExperimentConfig(scenarios=["2"], scenario_overrides={"n_frames": 50})
        (_, scenario), = config.resolved_scenarios()
        assert scenario.n_frames == 50

    def test_load_yaml(self, tmp_path):
        path = tmp_path / "exp.yml"
        path.write_text("scenarios: [1, 3]\nn_seeds: 2\nmethods: [aloha_structured]\n")
        config = load_config(path)
        assert config.scenarios == ["1", "3"]
        assert config.n_seeds == 2
        assert config.methods == ["aloha_structured"]
