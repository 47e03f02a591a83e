"""
MRC + successive interference cancellation receiver.

Devices colliding in a slot are decoded in decreasing order of received power
P_i * ||h_i||^2. The order is fixed once from (P, H) and is not re-sorted
between stages; a failed stage stops the chain and every remaining device of
the set is in outage.
"""

from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np
from scipy.special import expit

from gfra_sic.model.system import ChannelMatrix


@dataclass(frozen=True)
class SicOutcome:
    """Per-slot decoding report.

    `stage_sinr[m]` is the SINR of `ordered_devices[m]` once the m stronger
    devices are cancelled. Every stage is evaluated, including the ones after
    the first failure.
    """

    ordered_devices: Tuple[int, ...]
    stage_sinr: np.ndarray
    n_decoded: int


def received_power(power, channel: ChannelMatrix) -> np.ndarray:
    return np.asarray(power, dtype=np.float64) * channel.squared_norms


def order_by_received_power(devices: Iterable[int], power, channel: ChannelMatrix) -> np.ndarray:
    """Sort devices by decreasing received power, ties by ascending index."""
    devices = np.asarray(sorted(int(d) for d in devices), dtype=np.intp)
    if devices.size == 0:
        return devices
    rx = received_power(power, channel)[devices]
    return devices[np.lexsort((devices, -rx))]


def sinr(ordered, power, channel: ChannelMatrix, noise_power: float) -> Tuple[float, float]:
    """SINR of the first device of an ordered set under MRC, and its denominator.

    The denominator is sigma^2/||h_1||^2 plus the cross-gain weighted powers of
    the other devices of the set.

    Raises:
        ValueError: On an empty set or a zero channel for the first device.
    """
    ordered = np.asarray(ordered, dtype=np.intp)
    if ordered.size == 0:
        raise ValueError("SINR of an empty set is undefined")
    lead = ordered[0]
    if channel.squared_norms[lead] <= 0:
        raise ValueError(f"device {lead} has a zero channel")
    p = np.asarray(power, dtype=np.float64)
    denominator = noise_power / channel.squared_norms[lead] + float(
        channel.cross_gain[lead, ordered[1:]] @ p[ordered[1:]]
    )
    return float(p[lead] / denominator), float(denominator)


def stage_sinrs(
    ordered, power, channel: ChannelMatrix, noise_power: float
) -> Tuple[np.ndarray, np.ndarray]:
    """SINR and denominator of every SIC stage of an ordered set.

    Stage m sees the set with its m strongest devices removed.
    """
    ordered = np.asarray(ordered, dtype=np.intp)
    p = np.asarray(power, dtype=np.float64)[ordered]
    norms = channel.squared_norms[ordered]
    if np.any(norms <= 0):
        raise ValueError(f"devices {ordered[norms <= 0].tolist()} have a zero channel")
    # row m keeps only the devices decoded after stage m
    cross = np.triu(channel.cross_gain[np.ix_(ordered, ordered)], k=1)
    denominators = noise_power / norms + cross @ p
    return p / denominators, denominators


def sic_decode(
    devices, power, channel: ChannelMatrix, noise_power: float, sinr_threshold: float
) -> SicOutcome:
    """Hard SIC: count devices decoded before the first stage at or below threshold."""
    ordered = order_by_received_power(devices, power, channel)
    if ordered.size == 0:
        return SicOutcome((), np.zeros(0), 0)
    sinrs, _ = stage_sinrs(ordered, power, channel, noise_power)
    passed = sinrs > sinr_threshold
    n_decoded = int(ordered.size if passed.all() else np.argmin(passed))
    return SicOutcome(tuple(int(d) for d in ordered), sinrs, n_decoded)


def sic_smooth(
    devices,
    power,
    channel: ChannelMatrix,
    noise_power: float,
    sinr_threshold: float,
    sharpness: float,
) -> float:
    """Smoothed SIC count: sum over l of the product of the first l stage sigmoids.

    Each indicator SINR_m > gamma is replaced by sigmoid(b * (SINR_m - gamma)),
    so the value lies in [0, |S|] and tends to the hard count as b grows.
    """
    if sharpness <= 0:
        raise ValueError(f"sharpness must be positive, got {sharpness}")
    ordered = order_by_received_power(devices, power, channel)
    if ordered.size == 0:
        return 0.0
    sinrs, _ = stage_sinrs(ordered, power, channel, noise_power)
    gates = expit(sharpness * (sinrs - sinr_threshold))
    return float(np.cumprod(gates).sum())
