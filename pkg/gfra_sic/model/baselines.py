import logging
from typing import List, Tuple

import numpy as np

from gfra_sic.model.system import AllocationMatrix, PowerVector

logger = logging.getLogger(__name__)


def aloha_matrix(n_devices: int, n_slots: int) -> AllocationMatrix:
    """Frame slotted ALOHA: every device picks each slot with probability 1/K."""
    return AllocationMatrix(np.full((n_devices, n_slots), 1.0 / n_slots))


def structured_power_levels(p_min, p_max: float, n_levels=None) -> List[float]:
    """Doubling ladder of power levels seeded at the worst channel's P_min.

    Level j (1-based) is 2^(j-1) * max_i P_min,i, kept while it does not exceed
    p_max; `n_levels` truncates the ladder.
    """
    first = float(np.max(p_min))
    if first > p_max:
        raise ValueError(f"largest P_min {first} exceeds p_max {p_max}")
    levels = []
    level = first
    while level <= p_max:
        levels.append(level)
        level *= 2.0
    if n_levels is not None:
        levels = levels[:n_levels]
    return levels


def clamp_to_box(power, p_min, p_max: float, name: str = "baseline") -> PowerVector:
    """Clamp baseline powers into [P_min,i, p_max], logging every moved device."""
    p = np.asarray(power, dtype=np.float64)
    clamped = np.clip(p, p_min, p_max)
    moved = np.flatnonzero(clamped != p)
    if moved.size:
        logger.warning(
            f"{name}: clamped devices {moved.tolist()} from {p[moved].tolist()} "
            f"to {clamped[moved].tolist()}"
        )
    return PowerVector(clamped, p_min, p_max)


def cyclic_power_assignment(levels, n_devices: int, p_min, p_max: float) -> PowerVector:
    """Assign levels to devices round-robin: [l1, l2, ..., lJ, l1, ...]."""
    if len(levels) == 0:
        raise ValueError("at least one power level is required")
    power = np.resize(np.asarray(levels, dtype=np.float64), n_devices)
    return clamp_to_box(power, p_min, p_max, name="aloha_structured")


def greedy_allocation(
    activity, n_slots: int, levels, p_min, p_max: float
) -> Tuple[AllocationMatrix, PowerVector]:
    """Orthogonal slots for the most active devices, one shared slot for the rest.

    With J levels, the (J-1)*K most probable devices form J-1 blocks of K that
    each occupy the K slots one-to-one; the most probable block gets the lowest
    level and each less probable block the next level up. All remaining devices
    share slot 1 at the highest level.
    """
    p = np.asarray(activity, dtype=np.float64)
    n_devices = p.size
    if np.any(np.diff(p) < 0):
        raise ValueError("greedy allocation expects devices sorted by ascending activity")
    n_levels = len(levels)
    if n_levels == 0:
        raise ValueError("at least one power level is required")
    n_orthogonal = (n_levels - 1) * n_slots
    if n_orthogonal > n_devices:
        raise ValueError(
            f"greedy allocation needs (J-1)*K = {n_orthogonal} devices but only {n_devices} exist"
        )

    alloc = np.zeros((n_devices, n_slots))
    power = np.empty(n_devices)
    n_shared = n_devices - n_orthogonal
    alloc[:n_shared, 0] = 1.0
    power[:n_shared] = levels[-1]
    for block in range(n_levels - 1):
        # block 0 is the most probable one, at the end of the device list
        stop = n_devices - block * n_slots
        rows = np.arange(stop - n_slots, stop)
        alloc[rows, np.arange(n_slots)] = 1.0
        power[rows] = levels[block]
    return AllocationMatrix(alloc), clamp_to_box(power, p_min, p_max, name="greedy")
