"""
Domain types of the random-access system and their random generators.

Devices transmit on one of K slots per frame according to a row-stochastic
allocation matrix, with a per-device transmit power; a base station with N_r
antennas receives them through a block Rayleigh channel that stays fixed for
the whole run.
"""

from dataclasses import dataclass

import numpy as np

from gfra_sic.data.config import Scenario
from gfra_sic.utils.constant import ROW_SUM_ATOL


def _frozen(array, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ActivityVector:
    """Binary activity flags X of one frame."""

    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x, np.int8))
        if self.x.ndim != 1:
            raise ValueError(f"activity vector must be 1-D, got shape {self.x.shape}")
        if np.any((self.x != 0) & (self.x != 1)):
            raise ValueError("activity flags must be 0 or 1")

    def __array__(self, dtype=None, copy=None):
        return self.x.astype(dtype) if dtype is not None else self.x.copy()

    def __len__(self):
        return self.x.size

    @property
    def active(self) -> np.ndarray:
        """Indices of the active devices, ascending."""
        return np.flatnonzero(self.x)


@dataclass(frozen=True)
class AllocationMatrix:
    """Row-stochastic N x K matrix of conditional slot-selection probabilities."""

    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a, np.float64))
        if self.a.ndim != 2:
            raise ValueError(f"allocation matrix must be 2-D, got shape {self.a.shape}")
        if np.any(self.a < 0):
            raise ValueError("allocation matrix entries must be nonnegative")
        row_sums = self.a.sum(axis=1)
        if not np.allclose(row_sums, 1.0, rtol=0.0, atol=ROW_SUM_ATOL):
            raise ValueError(f"allocation matrix rows must sum to 1, got {row_sums}")

    def __array__(self, dtype=None, copy=None):
        return self.a.astype(dtype) if dtype is not None else self.a.copy()

    @property
    def shape(self):
        return self.a.shape


@dataclass(frozen=True)
class PowerVector:
    """Transmit powers P with their per-device box [p_min_i, p_max]."""

    p: np.ndarray
    p_min: np.ndarray
    p_max: float

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen(self.p, np.float64))
        object.__setattr__(self, "p_min", _frozen(self.p_min, np.float64))
        object.__setattr__(self, "p_max", float(self.p_max))
        if self.p.shape != self.p_min.shape:
            raise ValueError(
                f"power vector shape {self.p.shape} does not match p_min shape {self.p_min.shape}"
            )
        if np.any(self.p_min <= 0) or np.any(self.p_min > self.p_max):
            raise ValueError(
                f"infeasible power box: p_min={self.p_min.tolist()}, p_max={self.p_max}"
            )
        if np.any(self.p < self.p_min) or np.any(self.p > self.p_max):
            raise ValueError(f"powers {self.p.tolist()} outside the box [p_min, {self.p_max}]")

    def __array__(self, dtype=None, copy=None):
        return self.p.astype(dtype) if dtype is not None else self.p.copy()

    def with_powers(self, p) -> "PowerVector":
        return PowerVector(p, self.p_min, self.p_max)


@dataclass(frozen=True)
class ChannelMatrix:
    """N_r x N complex channel gains; column i is h_i.

    Caches the squared norms ||h_i||^2 and the MRC cross gains
    cross_gain[i, j] = (|h_j^H h_i| / ||h_i||^2)^2 used by the SINR.
    """

    h: np.ndarray
    squared_norms: np.ndarray
    cross_gain: np.ndarray

    @classmethod
    def from_array(cls, h) -> "ChannelMatrix":
        h = np.asarray(h, dtype=np.complex128)
        if h.ndim != 2:
            raise ValueError(f"channel matrix must be 2-D, got shape {h.shape}")
        squared_norms = np.sum(np.abs(h) ** 2, axis=0)
        gram = np.abs(h.conj().T @ h) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            cross_gain = gram / (squared_norms[:, None] ** 2)
        return cls(h, squared_norms, cross_gain)

    def __post_init__(self):
        object.__setattr__(self, "h", _frozen(self.h, np.complex128))
        object.__setattr__(self, "squared_norms", _frozen(self.squared_norms, np.float64))
        object.__setattr__(self, "cross_gain", _frozen(self.cross_gain, np.float64))
        recomputed = np.sum(np.abs(self.h) ** 2, axis=0)
        if not np.allclose(self.squared_norms, recomputed, rtol=1e-12, atol=0.0):
            raise ValueError("cached squared norms do not match the channel matrix")

    @property
    def n_antennas(self) -> int:
        return self.h.shape[0]

    @property
    def n_devices(self) -> int:
        return self.h.shape[1]


def sample_activity(activity, rng: np.random.Generator) -> ActivityVector:
    """Draw independent Bernoulli activity flags, one uniform per device in order."""
    p = np.asarray(activity, dtype=np.float64)
    return ActivityVector((rng.random(p.size) < p).astype(np.int8))


def sample_channel(n_devices: int, n_antennas: int, rng: np.random.Generator) -> ChannelMatrix:
    """Draw an i.i.d. CN(0, 1) channel, real part of each entry first."""
    if n_devices < 1 or n_antennas < 1:
        raise ValueError(f"channel dimensions must be positive, got ({n_antennas}, {n_devices})")
    parts = rng.normal(0.0, np.sqrt(0.5), size=(n_antennas, n_devices, 2))
    return ChannelMatrix.from_array(parts[..., 0] + 1j * parts[..., 1])


def compute_pmin(
    channel: ChannelMatrix, sinr_threshold: float, noise_power: float, margin: float
) -> np.ndarray:
    """Smallest power at which each device, transmitting alone, clears the threshold.

    P_min,i = (1 + margin) * gamma * sigma^2 / ||h_i||^2.

    Raises:
        ValueError: If a channel column is identically zero; the scenario must be re-drawn.
    """
    if margin < 0:
        raise ValueError(f"margin must be nonnegative, got {margin}")
    norms = channel.squared_norms
    if np.any(norms <= 0):
        raise ValueError(
            f"degenerate channel for devices {np.flatnonzero(norms <= 0).tolist()}, re-draw the scenario"
        )
    return (1.0 + margin) * sinr_threshold * noise_power / norms


def power_box(scenario: Scenario, channel: ChannelMatrix) -> np.ndarray:
    """P_min vector of a scenario under a channel draw.

    Raises:
        ValueError: If some device needs more than p_max to be decodable alone.
    """
    p_min = compute_pmin(
        channel, scenario.sinr_threshold, scenario.noise_power, scenario.pmin_margin
    )
    if np.any(p_min > scenario.p_max):
        bad = np.flatnonzero(p_min > scenario.p_max).tolist()
        raise ValueError(
            f"infeasible scenario: devices {bad} need P_min {p_min[bad].tolist()} > p_max {scenario.p_max}"
        )
    return p_min
