"""
Post-optimization power reduction for a fixed allocation matrix.

For every slot, the devices that may transmit there are peeled in SIC order.
Each device that leads a decodable context gets the smallest power that keeps
that context decodable and keeps the decoding order; a device's new power is
the largest such requirement over all contexts it leads. Passes repeat on the
reduced powers until nothing moves.

Departures from the printed pseudocode, following the prose instead:
- the minimal leader power is gamma * I, with I the SINR denominator (which
  already carries the 1/||h||^2 normalization);
- undecodable contexts are split by dropping one interferer at a time, and
  every sub-context is evaluated with the live power vector, not zeros;
- a device that never leads a decodable context drops to its P_min, unless it
  must stay above a weaker device of one of its slots.

Any device with a nonzero selection probability can collide in that slot; the
default support threshold is therefore 0.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from gfra_sic.data.config import Scenario
from gfra_sic.model.receiver import order_by_received_power, sinr
from gfra_sic.model.system import ChannelMatrix, PowerVector, power_box
from gfra_sic.utils.constant import REDUCTION_MAX_PASSES, REDUCTION_TOL

logger = logging.getLogger(__name__)


def slot_support(alloc, threshold: float = 0.0) -> List[np.ndarray]:
    """Per slot, the devices whose selection probability exceeds `threshold`."""
    if threshold < 0:
        raise ValueError(f"support threshold must be nonnegative, got {threshold}")
    a = np.asarray(alloc, dtype=np.float64)
    return [np.flatnonzero(a[:, k] > threshold) for k in range(a.shape[1])]


def reduction_slack(scenario: Scenario) -> float:
    """Absolute margin that turns SINR >= gamma into SINR > gamma."""
    return 1e-6 * scenario.sinr_threshold * scenario.noise_power


def required_power(
    ordered,
    power,
    channel: ChannelMatrix,
    scenario: Scenario,
    p_min: Optional[np.ndarray] = None,
    memo: Optional[Dict[Tuple[int, ...], float]] = None,
) -> float:
    """Smallest power of the leader of `ordered` that keeps its decodable contexts decodable.

    `ordered` must be sorted by decreasing received power under `power`. A return
    value of 0 means the leader is undecodable in every sub-context and this set
    places no constraint on it.
    """
    ordered = np.asarray(ordered, dtype=np.intp)
    key = tuple(int(d) for d in ordered)
    if memo is not None and key in memo:
        return memo[key]

    p = np.asarray(power, dtype=np.float64)
    if p_min is None:
        p_min = power_box(scenario, channel)
    slack = reduction_slack(scenario)
    lead = ordered[0]
    value, denominator = sinr(ordered, p, channel, scenario.noise_power)

    if value > scenario.sinr_threshold:
        need = scenario.sinr_threshold * denominator + slack
        if ordered.size >= 2:
            # keep the leader strictly above the next device's received power
            second = ordered[1]
            norms = channel.squared_norms
            need = max(need, p[second] * norms[second] / norms[lead] + slack)
        result = float(np.clip(need, p_min[lead], p[lead]))
    else:
        result = 0.0
        for i in range(1, ordered.size):
            result = max(
                result,
                required_power(np.delete(ordered, i), p, channel, scenario, p_min, memo),
            )

    if memo is not None:
        memo[key] = result
    return result


def reduction_pass(
    alloc,
    power,
    channel: ChannelMatrix,
    scenario: Scenario,
    p_min: np.ndarray,
    threshold: float = 0.0,
) -> np.ndarray:
    """One sweep over all slots; returns the accumulated per-device requirements."""
    p = np.asarray(power, dtype=np.float64)
    cleaned = p_min.copy()
    memo: Dict[Tuple[int, ...], float] = {}
    successors: Dict[int, List[int]] = {}
    for support in slot_support(alloc, threshold):
        ordered = order_by_received_power(support, p, channel)
        for i in range(ordered.size):
            lead = ordered[i]
            need = required_power(ordered[i:], p, channel, scenario, p_min, memo)
            cleaned[lead] = max(cleaned[lead], need)
            if i + 1 < ordered.size:
                successors.setdefault(int(lead), []).append(int(ordered[i + 1]))
    return keep_decoding_order(cleaned, p, channel, successors, reduction_slack(scenario))


def keep_decoding_order(
    cleaned: np.ndarray,
    power: np.ndarray,
    channel: ChannelMatrix,
    successors: Dict[int, List[int]],
    slack: float,
) -> np.ndarray:
    """Raise reduced powers so that every slot keeps its received-power order.

    `successors[d]` lists the next weaker device of `d` in each slot it uses,
    under `power`. Each device ends at least `slack` above all its successors
    but never above its own entry of `power`. Every per-slot order is a
    restriction of one global order, so a single sweep from the weakest
    device up settles all of them.
    """
    norms = channel.squared_norms
    weakest_first = order_by_received_power(np.arange(power.size), power, channel)[::-1]
    for d in weakest_first:
        for nxt in successors.get(int(d), []):
            floor = cleaned[nxt] * norms[nxt] / norms[d] + slack
            cleaned[d] = max(cleaned[d], min(floor, power[d]))
    return cleaned


def reduce_power(
    alloc,
    power,
    channel: ChannelMatrix,
    scenario: Scenario,
    threshold: float = 0.0,
    max_passes: int = REDUCTION_MAX_PASSES,
    tol: float = REDUCTION_TOL,
) -> PowerVector:
    """Shrink transmit powers without losing any decodable configuration.

    Raises:
        RuntimeError: If a pass raises any device's power.
    """
    p_min = power_box(scenario, channel)
    current = np.asarray(power, dtype=np.float64).copy()
    for n_pass in range(1, max_passes + 1):
        cleaned = reduction_pass(alloc, current, channel, scenario, p_min, threshold)
        if np.any(cleaned > current):
            raised = np.flatnonzero(cleaned > current).tolist()
            raise RuntimeError(
                f"power reduction pass {n_pass} increased the power of devices {raised}"
            )
        delta = float(np.max(np.abs(cleaned - current)))
        current = cleaned
        if delta < tol:
            break
    logger.debug(f"power reduction converged after {n_pass} passes: {current.tolist()}")
    return PowerVector(current, p_min, scenario.p_max)
