"""
Expected number of devices decoded without outage.

For an activity vector X (or the activity probabilities p, by independence of
the devices) the probability that exactly the subset S of devices picks slot k
is

    Q_k(S) = prod_{i in S} v_i A_ik * prod_{j not in S} (1 - v_j A_jk),

and the objective sums Q_k(S) * SIC(S, P) over slots and subsets. Devices with
v_i = 0 never appear in a transmitting subset, so only subsets of the devices
with v_i > 0 are enumerated.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from gfra_sic.data.config import Scenario
from gfra_sic.model.receiver import sic_decode, sic_smooth
from gfra_sic.model.system import ChannelMatrix, sample_activity
from gfra_sic.utils.constant import MAX_ENUMERATION_DEVICES

logger = logging.getLogger(__name__)

# masks per enumeration block, bounds the (masks, devices, slots) work array
ENUMERATION_BLOCK = 4096


@dataclass(frozen=True)
class ObjectiveReport:
    value: float
    per_slot: np.ndarray
    n_subsets_evaluated: int


def subset_masks(n: int, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    """Membership table of subsets start..stop-1 of n items; bit i of the subset id is item i."""
    stop = 2**n if stop is None else stop
    ids = np.arange(start, stop, dtype=np.int64)
    return ((ids[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(bool)


def slot_membership_factors(weights: np.ndarray, alloc: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Per-device factors of Q_k: v_i A_ik for members, 1 - v_i A_ik otherwise.

    Args:
        weights: (m,) activity flags or probabilities of the enumerated devices
        alloc: (m, K) allocation rows of the same devices
        masks: (n_subsets, m) membership table

    Returns:
        np.ndarray: (n_subsets, m, K)
    """
    w = weights[:, None] * alloc
    return np.where(masks[:, :, None], w[None], 1.0 - w[None])


def subset_probability(alloc, subset, weights, slot: int) -> float:
    """Probability that exactly `subset` transmits in `slot`.

    `weights` is a binary activity vector (conditional form) or the activity
    probability vector (marginal form).
    """
    a = np.asarray(alloc, dtype=np.float64)
    v = np.asarray(weights, dtype=np.float64)
    member = np.zeros(a.shape[0], dtype=bool)
    member[list(subset)] = True
    w = v * a[:, slot]
    return float(np.prod(np.where(member, w, 1.0 - w)))


def _enumerate_objective(
    alloc,
    weights: np.ndarray,
    sic_value: Callable[[np.ndarray], float],
    cache: Optional[Dict[int, float]] = None,
) -> ObjectiveReport:
    """Sum Q_k(S) * sic_value(S) over slots and subsets of the devices with weight > 0."""
    a = np.asarray(alloc, dtype=np.float64)
    n_slots = a.shape[1]
    devices = np.flatnonzero(weights > 0)
    per_slot = np.zeros(n_slots)
    if devices.size == 0:
        return ObjectiveReport(0.0, per_slot, 0)

    bits = np.left_shift(np.int64(1), devices.astype(np.int64))
    n_subsets = 2**devices.size
    # subset 0 is empty and contributes nothing
    for start in range(1, n_subsets, ENUMERATION_BLOCK):
        masks = subset_masks(devices.size, start, min(start + ENUMERATION_BLOCK, n_subsets))
        q = slot_membership_factors(weights[devices], a[devices], masks).prod(axis=1)
        values = np.empty(masks.shape[0])
        for row, (mask, key) in enumerate(zip(masks, masks.astype(np.int64) @ bits)):
            if cache is not None and key in cache:
                values[row] = cache[key]
                continue
            values[row] = sic_value(devices[mask])
            if cache is not None:
                cache[key] = values[row]
        per_slot += q.T @ values
    return ObjectiveReport(float(per_slot.sum()), per_slot, n_subsets - 1)


def conditional_objective(
    alloc, power, x, channel: ChannelMatrix, scenario: Scenario, cache: Optional[Dict[int, float]] = None
) -> ObjectiveReport:
    """Expected number of decoded devices given the activity vector x.

    `cache` maps subset bitmasks to SIC counts; pass the same dict across calls
    only while power and channel stay fixed.
    """

    def count(devices):
        return sic_decode(
            devices, power, channel, scenario.noise_power, scenario.sinr_threshold
        ).n_decoded

    return _enumerate_objective(alloc, np.asarray(x, dtype=np.float64), count, cache)


def smoothed_conditional_objective(alloc, power, x, channel: ChannelMatrix, scenario: Scenario) -> float:
    """conditional_objective with the sigmoid-smoothed SIC count."""

    def smooth(devices):
        return sic_smooth(
            devices,
            power,
            channel,
            scenario.noise_power,
            scenario.sinr_threshold,
            scenario.sharpness,
        )

    return _enumerate_objective(alloc, np.asarray(x, dtype=np.float64), smooth).value


def exact_expected_objective(alloc, power, activity, channel: ChannelMatrix, scenario: Scenario) -> float:
    """Expectation of the conditional objective over independent Bernoulli activity.

    Raises:
        ValueError: If N exceeds the subset-enumeration guard.
    """
    p = np.asarray(activity, dtype=np.float64)
    if p.size > MAX_ENUMERATION_DEVICES:
        raise ValueError(
            f"exact enumeration supports at most {MAX_ENUMERATION_DEVICES} devices, got {p.size}"
        )

    def count(devices):
        return sic_decode(
            devices, power, channel, scenario.noise_power, scenario.sinr_threshold
        ).n_decoded

    return _enumerate_objective(alloc, p, count).value


def mc_expected_objective(
    alloc,
    power,
    activity,
    channel: ChannelMatrix,
    scenario: Scenario,
    n_frames: int,
    rng: np.random.Generator,
) -> Tuple[float, float]:
    """Monte-Carlo estimate of the expected objective and its standard error."""
    if n_frames < 1:
        raise ValueError(f"n_frames must be positive, got {n_frames}")
    cache: Dict[int, float] = {}
    samples = np.empty(n_frames)
    for t in range(n_frames):
        x = sample_activity(activity, rng)
        samples[t] = conditional_objective(alloc, power, x, channel, scenario, cache).value
    logger.debug(f"Monte Carlo over {n_frames} frames visited {len(cache)} distinct transmit sets")
    if n_frames == 1:
        return float(samples[0]), 0.0
    return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(n_frames))


def normalized_objective(expected_value: float, activity) -> float:
    """Expected decoded devices divided by the expected number of active devices."""
    total = float(np.sum(np.asarray(activity, dtype=np.float64)))
    if total <= 0:
        raise ValueError("normalized objective is undefined for all-zero activity")
    return float(expected_value) / total


def expected_power(power, activity) -> float:
    """Average transmitted power E[P^T X] = sum_i p_i P_i."""
    return float(np.asarray(activity, dtype=np.float64) @ np.asarray(power, dtype=np.float64))
