from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple
from dataclasses import dataclass, field

import yaml
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from gfra_sic.utils.constant import (
    ALL_METHODS,
    builtin_scenario_table,
    scenario_defaults,
)


class Scenario(BaseModel):
    """Full description of one network experiment.

    Serialized as a JSON object whose keys are exactly the field names below.
    Instances are immutable; use `update` to derive a modified copy.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_devices: int = Field(gt=0)
    n_slots: int = Field(gt=0)
    # activity probabilities p, sorted ascending
    activity: Tuple[float, ...]
    n_antennas: int = Field(gt=0)
    # linear scale
    noise_power: float = Field(gt=0)
    sinr_threshold: float = Field(gt=0)
    p_max: float = Field(gt=0)
    pmin_margin: float = Field(ge=0)
    sharpness: float = Field(gt=0)
    step_size: float = Field(gt=0)
    n_frames: int = Field(gt=0)
    l1_weight: float = Field(ge=0)
    seed: int = Field(ge=0, lt=2**64)

    @field_validator("activity")
    @classmethod
    def _check_activity(cls, value):
        for p in value:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"activity probabilities must lie in [0, 1], got {p}")
        if any(b < a for a, b in zip(value, value[1:])):
            raise ValueError(f"activity must be sorted in nondecreasing order, got {list(value)}")
        return value

    @model_validator(mode="after")
    def _check_shapes(self):
        if len(self.activity) != self.n_devices:
            raise ValueError(
                f"activity has {len(self.activity)} entries but n_devices is {self.n_devices}"
            )
        return self

    @property
    def p(self) -> np.ndarray:
        """Activity probabilities as a float array."""
        return np.asarray(self.activity, dtype=np.float64)

    def as_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    def update(self, **kwargs) -> "Scenario":
        """Return a validated copy with the given fields replaced.

        Raises:
            ValueError: On an unknown field name.
        """
        for key in kwargs:
            if key not in type(self).model_fields:
                raise ValueError(f"Unknown scenario parameter: {key}")
        data = self.as_dict()
        data.update(kwargs)
        return Scenario.model_validate(data)

    @classmethod
    def from_json_file(cls, path) -> "Scenario":
        return cls.model_validate_json(Path(path).read_text())

    def to_json_file(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2))


def builtin_scenarios() -> List[Scenario]:
    """The four reference scenarios, in order 1..4."""
    return [builtin_scenario(k) for k in sorted(builtin_scenario_table)]


def builtin_scenario(scenario_id) -> Scenario:
    key = str(scenario_id)
    if key not in builtin_scenario_table:
        raise ValueError(
            f"Unknown built-in scenario {scenario_id!r}, expected one of {sorted(builtin_scenario_table)}"
        )
    return Scenario(**scenario_defaults, **builtin_scenario_table[key])


def resolve_scenario(ref) -> Tuple[str, Scenario]:
    """Resolve a built-in id ("1".."4") or a JSON file path to (scenario_id, Scenario)."""
    key = str(ref)
    if key in builtin_scenario_table:
        return key, builtin_scenario(key)
    path = Path(key)
    if not path.exists():
        raise ValueError(f"Scenario {key!r} is neither a built-in id nor an existing file")
    return path.stem, Scenario.from_json_file(path)


@dataclass
class ExperimentConfig:
    """Configuration of a full experiment run.

    A run covers every (scenario, method, seed) cell; all methods of one
    (scenario, seed) cell share the same channel draw.
    """

    # Built-in ids or scenario JSON paths
    scenarios: List[str] = field(default_factory=lambda: ["1", "2", "3", "4"])
    methods: List[str] = field(default_factory=lambda: list(ALL_METHODS))
    n_seeds: int = 10
    output_dir: str = "outputs"

    # Baselines and power reduction
    baseline_levels: int = 2
    support_threshold: float = 0.0

    # Optimization loop
    checkpoint_every: int = 1000
    log_every: int = 10000
    redraw_channels: bool = False
    show_progress: bool = False
    scenario_overrides: Dict[str, Any] = field(default_factory=dict)

    # Evaluation
    mc_check_frames: int = 0

    # Execution and logging
    workers: int = 1
    record_wall_time: bool = True
    use_wandb: bool = False
    log_project: str = "gfra_sic"
    log_name: Optional[str] = None

    def __post_init__(self):
        self.scenarios = [str(s) for s in self.scenarios]
        if not self.scenarios:
            raise ValueError("scenarios must not be empty")
        if not self.methods:
            raise ValueError("methods must not be empty")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ValueError(f"Unknown methods {unknown}, expected a subset of {ALL_METHODS}")
        if self.n_seeds < 1:
            raise ValueError(f"n_seeds must be positive, got {self.n_seeds}")
        if self.baseline_levels < 1:
            raise ValueError(f"baseline_levels must be positive, got {self.baseline_levels}")
        if self.support_threshold < 0:
            raise ValueError(f"support_threshold must be nonnegative, got {self.support_threshold}")
        if self.checkpoint_every < 1 or self.log_every < 1:
            raise ValueError("checkpoint_every and log_every must be positive")
        if self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")

    def as_dict(self) -> Dict:
        return dict(self.__dict__)

    def update(self, **kwargs) -> "ExperimentConfig":
        """Update configuration parameters in place and re-validate.

        Raises:
            ValueError: On an unknown parameter name.
        """
        for key, value in kwargs.items():
            if hasattr(self, key):
                setattr(self, key, value)
            else:
                raise ValueError(f"Unknown configuration parameter: {key}")
        self.__post_init__()
        return self

    def resolved_scenarios(self) -> List[Tuple[str, Scenario]]:
        """(scenario_id, Scenario) pairs with `scenario_overrides` applied."""
        resolved = []
        for ref in self.scenarios:
            scenario_id, scenario = resolve_scenario(ref)
            if self.scenario_overrides:
                scenario = scenario.update(**self.scenario_overrides)
            resolved.append((scenario_id, scenario))
        return resolved


def load_config(config_path) -> ExperimentConfig:
    """Load an experiment configuration from a YAML file."""
    with open(config_path, "r") as f:
        config = yaml.load(f, Loader=yaml.FullLoader) or {}
    return ExperimentConfig().update(**config)
