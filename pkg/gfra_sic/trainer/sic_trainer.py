import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from gfra_sic.data.config import Scenario
from gfra_sic.model.grad import add_l1_penalty, grad_smoothed
from gfra_sic.model.objective import exact_expected_objective, expected_power
from gfra_sic.model.system import (
    AllocationMatrix,
    ChannelMatrix,
    PowerVector,
    power_box,
    sample_activity,
    sample_channel,
)
from gfra_sic.trainer.optim import (
    AdagradState,
    project_box,
    project_simplex_rows,
    random_simplex_rows,
)
from gfra_sic.utils.constant import ADAGRAD_EPS, ROW_SUM_ATOL

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["frame", "smoothed_sample", "exact_objective", "mean_power"]


@dataclass(frozen=True)
class TraceRecord:
    frame: int
    smoothed_sample: float
    exact_objective: Optional[float]
    mean_power: float


@dataclass
class TrainTrace:
    """Per-frame record of an optimization run.

    `power_snapshots` maps a checkpoint frame to the power vector after that
    frame's update.
    """

    records: List[TraceRecord] = field(default_factory=list)
    power_snapshots: Dict[int, np.ndarray] = field(default_factory=dict)

    def append(self, record: TraceRecord) -> None:
        if self.records and record.frame <= self.records[-1].frame:
            raise ValueError(
                f"trace frames must increase, got {record.frame} after {self.records[-1].frame}"
            )
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def checkpoints(self) -> List[TraceRecord]:
        return [r for r in self.records if r.exact_objective is not None]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                (r.frame, r.smoothed_sample, r.exact_objective, r.mean_power)
                for r in self.records
            ],
            columns=TRACE_COLUMNS,
        )

    def write_csv(self, path) -> None:
        """Write the trace; unsampled exact objectives are left blank."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, na_rep="")


class TrainerCallback:
    """Hooks called by the optimization loop; subclasses override what they need."""

    def on_train_begin(self, scenario: Scenario, alloc: AllocationMatrix, power: PowerVector):
        pass

    def on_frame_end(self, record: TraceRecord, alloc: AllocationMatrix, power: PowerVector):
        pass

    def on_train_end(self, trace: TrainTrace):
        pass


class FeasibilityCheck(TrainerCallback):
    """Asserts that every iterate lies in the feasible set."""

    def on_frame_end(self, record, alloc, power):
        a = np.asarray(alloc)
        p = np.asarray(power)
        row_sums = a.sum(axis=1)
        if np.any(a < 0) or not np.allclose(row_sums, 1.0, rtol=0.0, atol=ROW_SUM_ATOL):
            raise RuntimeError(f"frame {record.frame}: allocation left the simplex, row sums {row_sums}")
        if np.any(p < power.p_min) or np.any(p > power.p_max):
            raise RuntimeError(f"frame {record.frame}: powers {p.tolist()} left the box")


class WandbCallback(TrainerCallback):
    """Forwards trace records to Weights & Biases."""

    def __init__(self, project: str, name: Optional[str] = None, config: Optional[dict] = None):
        import wandb

        self._wandb = wandb
        self.run = wandb.init(project=project, name=name, config=config or {}, reinit=True)

    def on_frame_end(self, record, alloc, power):
        log_dict = {"smoothed_sample": record.smoothed_sample, "mean_power": record.mean_power}
        if record.exact_objective is not None:
            log_dict["exact_objective"] = record.exact_objective
        self.run.log(log_dict, step=record.frame)

    def on_train_end(self, trace):
        self.run.finish()


def initial_point(
    scenario: Scenario, channel: ChannelMatrix, rng: np.random.Generator
) -> Tuple[AllocationMatrix, PowerVector]:
    """Random row-stochastic A and P = P_min."""
    p_min = power_box(scenario, channel)
    alloc = random_simplex_rows(scenario.n_devices, scenario.n_slots, rng)
    return alloc, PowerVector(p_min, p_min, scenario.p_max)


def optimize(
    scenario: Scenario,
    channel: ChannelMatrix,
    init_alloc: AllocationMatrix,
    init_power: PowerVector,
    l1_weight: float,
    rng: np.random.Generator,
    callbacks: Sequence[TrainerCallback] = (),
    n_frames: Optional[int] = None,
    checkpoint_every: int = 1000,
    log_every: int = 10000,
    show_progress: bool = False,
    channel_rng: Optional[np.random.Generator] = None,
) -> Tuple[AllocationMatrix, PowerVector, TrainTrace]:
    """Projected stochastic ADAGRAD ascent on the smoothed objective.

    Each frame samples an activity vector from `rng`, takes the gradient of
    the smoothed conditional objective (minus `l1_weight * sum(P)` when
    `l1_weight > 0`), steps both parameter blocks, then projects A onto the
    row simplex and P onto its box. Every `checkpoint_every` frames the exact
    expected objective of the current iterate is recorded in the trace.

    Args:
        n_frames: Overrides `scenario.n_frames`; 0 returns the initial point.
        channel_rng: If given, a fresh channel is drawn from it every frame
            while the power box stays the one of `channel`.

    Raises:
        ValueError: If the scenario is infeasible under `channel` or the
            initial point is not feasible.
    """
    n_frames = scenario.n_frames if n_frames is None else int(n_frames)
    if n_frames < 0:
        raise ValueError(f"n_frames must be nonnegative, got {n_frames}")
    if checkpoint_every < 1:
        raise ValueError(f"checkpoint_every must be positive, got {checkpoint_every}")
    p_min = power_box(scenario, channel)
    init_alloc = AllocationMatrix(np.asarray(init_alloc))
    init_power = PowerVector(np.asarray(init_power), p_min, scenario.p_max)
    activity = scenario.p

    trace = TrainTrace()
    alloc, power = init_alloc, init_power
    for callback in callbacks:
        callback.on_train_begin(scenario, alloc, power)
    if n_frames == 0:
        for callback in callbacks:
            callback.on_train_end(trace)
        return alloc, power, trace

    state = AdagradState(np.asarray(alloc), np.asarray(power), scenario.step_size, ADAGRAD_EPS)
    frame_channel = channel
    for frame in tqdm(range(1, n_frames + 1), desc="frames", disable=not show_progress):
        x = sample_activity(activity, rng)
        if channel_rng is not None:
            frame_channel = sample_channel(scenario.n_devices, scenario.n_antennas, channel_rng)

        gradient = grad_smoothed(alloc, power, x, frame_channel, scenario)
        smoothed_sample = gradient.value
        if l1_weight > 0:
            gradient = add_l1_penalty(gradient, power, l1_weight)

        new_alloc, new_power = state.step(gradient)
        alloc = project_simplex_rows(new_alloc)
        power = project_box(new_power, p_min, scenario.p_max)
        state.load_params(np.asarray(alloc), np.asarray(power))

        exact = None
        if frame % checkpoint_every == 0:
            exact = exact_expected_objective(alloc, power, activity, channel, scenario)
            trace.power_snapshots[frame] = np.asarray(power)
        record = TraceRecord(frame, smoothed_sample, exact, expected_power(power, activity))
        trace.append(record)
        for callback in callbacks:
            callback.on_frame_end(record, alloc, power)

        if frame % log_every == 0:
            logger.info(
                f"frame {frame}/{n_frames}: smoothed {smoothed_sample:.4f}, "
                f"exact {exact if exact is not None else float('nan'):.4f}, "
                f"mean power {record.mean_power:.4f}"
            )

    for callback in callbacks:
        callback.on_train_end(trace)
    return alloc, power, trace
