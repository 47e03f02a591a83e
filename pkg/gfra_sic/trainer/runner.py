"""
Experiment orchestration.

A run cell is one (scenario, seed index) pair. All methods of a cell share
the cell's channel draw, activity stream and initial point. Each finished
cell leaves a shard directory with its records, the settings they were
computed under, final parameters and optimization traces. A rerun reuses the
stored records of methods it still runs when the settings match, computes
only the missing methods, and recomputes the whole cell otherwise. The shards
are merged into results.csv and summary.csv.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from gfra_sic.data.config import ExperimentConfig, Scenario
from gfra_sic.data.io import (
    CellManifest,
    ResultRecord,
    load_manifest,
    load_records,
    save_manifest,
    save_params,
    save_records,
    write_results,
    write_summary,
)
from gfra_sic.model.baselines import (
    aloha_matrix,
    cyclic_power_assignment,
    greedy_allocation,
    structured_power_levels,
)
from gfra_sic.model.objective import (
    exact_expected_objective,
    expected_power,
    mc_expected_objective,
    normalized_objective,
)
from gfra_sic.model.power_reduction import reduce_power
from gfra_sic.model.system import (
    AllocationMatrix,
    ChannelMatrix,
    PowerVector,
    power_box,
    sample_channel,
)
from gfra_sic.trainer.sic_trainer import (
    WandbCallback,
    initial_point,
    optimize,
)
from gfra_sic.utils.constant import (
    METHOD_ALG1,
    METHOD_ALG1_L1,
    METHOD_ALG1_REDUCED,
    METHOD_ALOHA,
    METHOD_GREEDY,
    METHOD_INIT,
    MAX_CHANNEL_DRAWS,
    ROUNDOFF_ATOL,
)
from gfra_sic.utils.rng import CellStreams
from gfra_sic.utils.timers import Timers

logger = logging.getLogger(__name__)

RECORDS_FILE = "records.json"
MANIFEST_FILE = "cell.json"


def method_slug(method: str) -> str:
    return method.replace("+", "_")


def cell_dir(output_dir, scenario_id: str, seed_index: int) -> Path:
    return Path(output_dir) / f"scenario_{scenario_id}" / f"seed_{seed_index}"


def draw_feasible_channel(
    scenario: Scenario, rng: np.random.Generator, max_draws: int = MAX_CHANNEL_DRAWS
) -> Tuple[ChannelMatrix, int]:
    """First channel from `rng` under which every device fits the power box, and the draw count.

    Raises:
        ValueError: If no feasible channel shows up within `max_draws` draws.
    """
    for n_draws in range(1, max_draws + 1):
        channel = sample_channel(scenario.n_devices, scenario.n_antennas, rng)
        try:
            power_box(scenario, channel)
        except ValueError:
            continue
        return channel, n_draws
    raise ValueError(f"no feasible channel in {max_draws} draws; raise p_max or lower sinr_threshold")


def cell_channel(scenario: Scenario, streams: CellStreams) -> ChannelMatrix:
    channel, n_draws = draw_feasible_channel(scenario, streams.channel())
    if n_draws > 1:
        logger.info(f"channel redrawn {n_draws - 1} time(s) to fit the power box")
    return channel


def redraw_stream(scenario: Scenario, streams: CellStreams) -> np.random.Generator:
    """Channel generator positioned right after the cell's own channel draw."""
    rng = streams.channel()
    draw_feasible_channel(scenario, rng)
    return rng


def evaluate(
    alloc,
    power,
    scenario: Scenario,
    channel: ChannelMatrix,
    mc_frames: int = 0,
    mc_rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float]:
    """Exact normalized objective and average transmit power of (A, P).

    With `mc_frames > 0` the exact value is also cross-checked against a
    Monte-Carlo estimate drawn from `mc_rng`, and the z-score is logged.
    """
    activity = scenario.p
    exact = exact_expected_objective(alloc, power, activity, channel, scenario)
    t_normalized = normalized_objective(exact, activity)
    if mc_frames > 0:
        if mc_rng is None:
            raise ValueError("a Monte-Carlo generator is required when mc_frames > 0")
        mean, se = mc_expected_objective(alloc, power, activity, channel, scenario, mc_frames, mc_rng)
        z = (mean - exact) / se if se > 0 else 0.0
        level = logging.WARNING if abs(z) > 3 else logging.INFO
        logger.log(level, f"exact {exact:.6f} vs Monte Carlo {mean:.6f} +- {se:.6f} (z = {z:.2f})")
    if not -ROUNDOFF_ATOL <= t_normalized <= 1.0 + ROUNDOFF_ATOL:
        raise RuntimeError(f"normalized objective {t_normalized!r} is outside [0, 1]")
    # only roundoff is clipped
    return float(np.clip(t_normalized, 0.0, 1.0)), expected_power(power, activity)


def baseline_parameters(
    method: str, scenario: Scenario, channel: ChannelMatrix, n_levels: int
) -> Tuple[AllocationMatrix, PowerVector]:
    """(A, P) of the ALOHA-structured or greedy baseline."""
    p_min = power_box(scenario, channel)
    levels = structured_power_levels(p_min, scenario.p_max, n_levels)
    if method == METHOD_ALOHA:
        alloc = aloha_matrix(scenario.n_devices, scenario.n_slots)
        return alloc, cyclic_power_assignment(levels, scenario.n_devices, p_min, scenario.p_max)
    if method == METHOD_GREEDY:
        return greedy_allocation(scenario.p, scenario.n_slots, levels, p_min, scenario.p_max)
    raise ValueError(f"{method!r} is not a baseline method")


class CellRunner:
    """Runs every configured method on one (scenario, seed index) cell."""

    def __init__(self, config: ExperimentConfig, scenario_id: str, scenario: Scenario, seed_index: int):
        self.config = config
        self.scenario_id = scenario_id
        self.scenario = scenario
        self.seed_index = seed_index
        self.out_dir = cell_dir(config.output_dir, scenario_id, seed_index)
        self.streams = CellStreams.from_seed(scenario.seed, seed_index)
        self.channel = cell_channel(scenario, self.streams)
        self.timers = Timers()
        self._alg1_output: Optional[Tuple[AllocationMatrix, PowerVector]] = None

    @property
    def tag(self) -> str:
        return f"scenario {self.scenario_id} seed {self.seed_index}"

    def _callbacks(self, method: str):
        if not self.config.use_wandb:
            return []
        name = self.config.log_name or "run"
        return [
            WandbCallback(
                project=self.config.log_project,
                name=f"{name}-s{self.scenario_id}-{method_slug(method)}-seed{self.seed_index}",
                config={"scenario": self.scenario.as_dict(), "method": method},
            )
        ]

    def _optimize(self, method: str, l1_weight: float) -> Tuple[AllocationMatrix, PowerVector]:
        alloc, power = initial_point(self.scenario, self.channel, self.streams.init())
        channel_rng = redraw_stream(self.scenario, self.streams) if self.config.redraw_channels else None
        with self.timers(f"optimize:{method}"):
            alloc, power, trace = optimize(
                self.scenario,
                self.channel,
                alloc,
                power,
                l1_weight,
                self.streams.activity(),
                callbacks=self._callbacks(method),
                checkpoint_every=self.config.checkpoint_every,
                log_every=self.config.log_every,
                show_progress=self.config.show_progress,
                channel_rng=channel_rng,
            )
        trace.write_csv(self.out_dir / f"trace_{method_slug(method)}.csv")
        return alloc, power

    def _alg1(self) -> Tuple[AllocationMatrix, PowerVector]:
        if self._alg1_output is None:
            self._alg1_output = self._optimize(METHOD_ALG1, 0.0)
        return self._alg1_output

    def parameters(self, method: str) -> Tuple[Tuple[AllocationMatrix, PowerVector], List[str]]:
        """Final (A, P) of a method and the timer names charged to it."""
        if method == METHOD_INIT:
            return initial_point(self.scenario, self.channel, self.streams.init()), []
        if method == METHOD_ALG1:
            return self._alg1(), [f"optimize:{METHOD_ALG1}"]
        if method == METHOD_ALG1_REDUCED:
            alloc, power = self._alg1()
            with self.timers("power-reduction"):
                reduced = reduce_power(
                    alloc, power, self.channel, self.scenario, self.config.support_threshold
                )
            return (alloc, reduced), [f"optimize:{METHOD_ALG1}", "power-reduction"]
        if method == METHOD_ALG1_L1:
            return self._optimize(method, self.scenario.l1_weight), [f"optimize:{method}"]
        with self.timers(f"baseline:{method}"):
            params = baseline_parameters(
                method, self.scenario, self.channel, self.config.baseline_levels
            )
        return params, [f"baseline:{method}"]

    def manifest(self) -> CellManifest:
        return CellManifest(
            scenario=self.scenario,
            support_threshold=self.config.support_threshold,
            baseline_levels=self.config.baseline_levels,
            redraw_channels=self.config.redraw_channels,
        )

    def stored_records(self) -> Dict[str, ResultRecord]:
        """Records of an earlier run of this cell under the same settings, by method."""
        shard = self.out_dir / RECORDS_FILE
        if not shard.exists():
            return {}
        if load_manifest(self.out_dir / MANIFEST_FILE) != self.manifest():
            logger.warning(f"{self.tag}: settings changed since {shard} was written, recomputing")
            return {}
        return {r.method: r for r in load_records(shard)}

    def run(self) -> List[ResultRecord]:
        stored = self.stored_records()
        missing = [m for m in self.config.methods if m not in stored]
        if not missing:
            logger.info(f"{self.tag}: already complete, loading {self.out_dir / RECORDS_FILE}")
            return [stored[m] for m in self.config.methods]
        if stored:
            logger.info(f"{self.tag}: reusing {sorted(stored)}, computing {missing}")

        for method in missing:
            try:
                (alloc, power), charged = self.parameters(method)
                with self.timers(f"evaluate:{method}"):
                    t_normalized, e_power = evaluate(
                        alloc,
                        power,
                        self.scenario,
                        self.channel,
                        self.config.mc_check_frames,
                        self.streams.monte_carlo(),
                    )
            except Exception as e:
                logger.error(f"{self.tag} method {method} failed: {e!r}")
                continue
            save_params(self.out_dir / f"params_{method_slug(method)}.json", alloc, power, self.channel)
            wall_time = (
                self.timers.total(charged + [f"evaluate:{method}"])
                if self.config.record_wall_time
                else 0.0
            )
            stored[method] = ResultRecord(
                scenario=self.scenario_id,
                method=method,
                seed=self.seed_index,
                t_normalized=t_normalized,
                expected_power=e_power,
                wall_time_s=wall_time,
            )
            logger.info(f"{self.tag} {method}: T^N {t_normalized:.4f}, E[P^T X] {e_power:.4f}")

        self.timers.log(prefix=f"{self.tag} ")
        save_manifest(self.out_dir / MANIFEST_FILE, self.manifest())
        # the records file is written last and marks the cell complete
        save_records(self.out_dir / RECORDS_FILE, list(stored.values()))
        return [stored[m] for m in self.config.methods if m in stored]


def run_cell(config: ExperimentConfig, scenario_id: str, scenario: Scenario, seed_index: int) -> List[ResultRecord]:
    """Run one cell; any failure is logged and yields no records."""
    try:
        return CellRunner(config, scenario_id, scenario, seed_index).run()
    except Exception as e:
        logger.exception(f"scenario {scenario_id} seed {seed_index} failed: {e!r}")
        return []


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.output_dir = Path(config.output_dir)

    def cells(self) -> List[Tuple[str, Scenario, int]]:
        return [
            (scenario_id, scenario, seed_index)
            for scenario_id, scenario in self.config.resolved_scenarios()
            for seed_index in range(self.config.n_seeds)
        ]

    def run(self) -> List[ResultRecord]:
        cells = self.cells()
        logger.info(
            f"running {len(cells)} cells x {len(self.config.methods)} methods "
            f"with {self.config.workers} worker(s) into {self.output_dir}"
        )
        if self.config.workers == 1:
            per_cell = [run_cell(self.config, *cell) for cell in cells]
        else:
            with ProcessPoolExecutor(max_workers=self.config.workers) as executor:
                futures = [executor.submit(run_cell, self.config, *cell) for cell in cells]
                per_cell = [future.result() for future in futures]

        records = self._ordered([r for cell_records in per_cell for r in cell_records])
        results = write_results(self.output_dir / "results.csv", records)
        write_summary(self.output_dir / "summary.csv", results)
        logger.info(f"wrote {len(records)} records to {self.output_dir / 'results.csv'}")
        return records

    def _ordered(self, records: List[ResultRecord]) -> List[ResultRecord]:
        # scenario order of the config, then method order of the config, then seed
        method_rank: Dict[str, int] = {m: i for i, m in enumerate(self.config.methods)}
        scenario_rank: Dict[str, int] = {}
        for scenario_id, _, _ in self.cells():
            scenario_rank.setdefault(scenario_id, len(scenario_rank))
        return sorted(
            records,
            key=lambda r: (scenario_rank[r.scenario], method_rank[r.method], r.seed),
        )


def run_experiment(config: ExperimentConfig) -> List[ResultRecord]:
    return ExperimentRunner(config).run()
