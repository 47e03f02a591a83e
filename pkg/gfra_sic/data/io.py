"""
On-disk formats: parameter JSON files, per-cell result shards and the merged
results/summary tables.
"""

from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from gfra_sic.data.config import Scenario
from gfra_sic.model.system import ChannelMatrix

RESULT_COLUMNS = ["scenario", "method", "seed", "t_normalized", "expected_power", "wall_time_s"]
SUMMARY_COLUMNS = [
    "scenario",
    "method",
    "n_seeds",
    "t_normalized_mean",
    "t_normalized_std",
    "expected_power_mean",
    "expected_power_std",
]


class ParamsFile(BaseModel):
    """Final parameters of a method together with the channel they were computed on."""

    model_config = ConfigDict(extra="forbid")

    A: List[List[float]]
    P: List[float]
    H_real: List[List[float]]
    H_imag: List[List[float]]


class ResultRecord(BaseModel):
    """One row of results.csv."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    scenario: str
    method: str
    seed: int = Field(ge=0)
    t_normalized: float = Field(ge=0.0, le=1.0)
    expected_power: float = Field(ge=0.0)
    wall_time_s: float = Field(ge=0.0)


class CellManifest(BaseModel):
    """Settings a run cell was computed under; stored next to its records."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    scenario: Scenario
    support_threshold: float
    baseline_levels: int
    redraw_channels: bool


_records_adapter = TypeAdapter(List[ResultRecord])


def save_params(path, alloc, power, channel: ChannelMatrix) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    h = np.asarray(channel.h)
    params = ParamsFile(
        A=np.asarray(alloc, dtype=np.float64).tolist(),
        P=np.asarray(power, dtype=np.float64).tolist(),
        H_real=h.real.tolist(),
        H_imag=h.imag.tolist(),
    )
    path.write_text(params.model_dump_json(indent=2))


def load_params(path) -> Tuple[np.ndarray, np.ndarray, ChannelMatrix]:
    """Read a parameter file back as (A, P, channel).

    Raises:
        pydantic.ValidationError: On missing or unexpected keys.
        ValueError: On inconsistent shapes.
    """
    params = ParamsFile.model_validate_json(Path(path).read_text())
    alloc = np.asarray(params.A, dtype=np.float64)
    power = np.asarray(params.P, dtype=np.float64)
    h = np.asarray(params.H_real, dtype=np.float64) + 1j * np.asarray(params.H_imag, dtype=np.float64)
    if alloc.ndim != 2 or alloc.shape[0] != power.size or h.ndim != 2 or h.shape[1] != power.size:
        raise ValueError(
            f"inconsistent parameter shapes: A {alloc.shape}, P {power.shape}, H {h.shape}"
        )
    return alloc, power, ChannelMatrix.from_array(h)


def save_records(path, records: Sequence[ResultRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(_records_adapter.dump_json(list(records), indent=2))


def load_records(path) -> List[ResultRecord]:
    return _records_adapter.validate_json(Path(path).read_bytes())


def records_frame(records: Sequence[ResultRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in records], columns=RESULT_COLUMNS)


def write_results(path, records: Sequence[ResultRecord]) -> pd.DataFrame:
    """Write results.csv in the given record order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = records_frame(records)
    frame.to_csv(path, index=False)
    return frame


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """Mean and sample standard deviation across seeds per (scenario, method)."""
    grouped = results.groupby(["scenario", "method"], sort=False)
    summary = grouped.agg(
        n_seeds=("seed", "count"),
        t_normalized_mean=("t_normalized", "mean"),
        t_normalized_std=("t_normalized", "std"),
        expected_power_mean=("expected_power", "mean"),
        expected_power_std=("expected_power", "std"),
    ).reset_index()
    # a single seed has no spread
    return summary.fillna({"t_normalized_std": 0.0, "expected_power_std": 0.0})[SUMMARY_COLUMNS]


def write_summary(path, results: pd.DataFrame) -> pd.DataFrame:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary = summarize(results)
    summary.to_csv(path, index=False)
    return summary


def save_manifest(path, manifest: CellManifest) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2))


def load_manifest(path) -> Optional[CellManifest]:
    """The stored manifest, or None if it is missing or unreadable."""
    path = Path(path)
    if not path.exists():
        return None
    try:
        return CellManifest.model_validate_json(path.read_text())
    except ValidationError:
        return None
