"""
Exact gradients of the smoothed conditional objective with respect to the
allocation matrix A and the power vector P.

The objective is sum_k sum_S Q_k(S) * F(S, P) with F the smoothed SIC count.
dQ_k/dA_ik is the product of every other factor of Q_k (taken from prefix and
suffix products, never by dividing a stored factor), with a minus sign when i
is not in S. dF/dP follows each stage sigmoid through the MRC SINR, which is
linear in the leader's power and in the interferers' powers through its
denominator.
"""

from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import expit

from gfra_sic.data.config import Scenario
from gfra_sic.model.objective import (
    ENUMERATION_BLOCK,
    slot_membership_factors,
    smoothed_conditional_objective,
    subset_masks,
)
from gfra_sic.model.receiver import order_by_received_power, stage_sinrs
from gfra_sic.model.system import ChannelMatrix


@dataclass(frozen=True)
class Gradient:
    """Gradient of the (maximized) objective; `value` is the objective at the same point."""

    d_alloc: np.ndarray
    d_power: np.ndarray
    value: float = 0.0


def smoothed_sic_with_grad(
    devices, power, channel: ChannelMatrix, scenario: Scenario
) -> Tuple[float, np.ndarray]:
    """Smoothed SIC count of a set and its gradient over the full power vector."""
    p = np.asarray(power, dtype=np.float64)
    grad = np.zeros_like(p)
    ordered = order_by_received_power(devices, p, channel)
    if ordered.size == 0:
        return 0.0, grad

    sinrs, denominators = stage_sinrs(ordered, p, channel, scenario.noise_power)
    gates = expit(scenario.sharpness * (sinrs - scenario.sinr_threshold))
    n = ordered.size

    # F = g1 (1 + g2 (1 + g3 (...))): dF/dg_m = prod_{m'<m} g_m' * tail_m
    prefix = np.concatenate(([1.0], np.cumprod(gates[:-1])))
    tail = np.ones(n)
    for m in range(n - 2, -1, -1):
        tail[m] = 1.0 + gates[m + 1] * tail[m + 1]
    d_sinr = prefix * tail * scenario.sharpness * gates * (1.0 - gates)

    # leader term 1/D_m, interferer term -SINR_m * c_mj / D_m for j decoded later
    cross = np.triu(channel.cross_gain[np.ix_(ordered, ordered)], k=1)
    grad[ordered] = d_sinr / denominators - cross.T @ (d_sinr * sinrs / denominators)
    return float(np.cumprod(gates).sum()), grad


def grad_smoothed(alloc, power, x, channel: ChannelMatrix, scenario: Scenario) -> Gradient:
    """Gradient of the smoothed conditional objective at (A, P) for the activity x."""
    a = np.asarray(alloc, dtype=np.float64)
    p = np.asarray(power, dtype=np.float64)
    v = np.asarray(x, dtype=np.float64)
    d_alloc = np.zeros_like(a)
    d_power = np.zeros_like(p)
    devices = np.flatnonzero(v > 0)
    if devices.size == 0:
        return Gradient(d_alloc, d_power, 0.0)

    m = devices.size
    a_active = a[devices]
    n_subsets = 2**m
    value = 0.0
    for start in range(1, n_subsets, ENUMERATION_BLOCK):
        masks = subset_masks(m, start, min(start + ENUMERATION_BLOCK, n_subsets))
        factors = slot_membership_factors(v[devices], a_active, masks)
        ones = np.ones_like(factors[:, :1])
        before = np.concatenate([ones, np.cumprod(factors[:, :-1], axis=1)], axis=1)
        after = np.concatenate(
            [np.cumprod(factors[:, :0:-1], axis=1)[:, ::-1], ones], axis=1
        )
        q = factors.prod(axis=1)

        smooth = np.empty(masks.shape[0])
        power_grads = np.empty((masks.shape[0], p.size))
        for row, mask in enumerate(masks):
            smooth[row], power_grads[row] = smoothed_sic_with_grad(
                devices[mask], p, channel, scenario
            )

        sign = np.where(masks, 1.0, -1.0) * v[devices][None, :]
        d_alloc[devices] += np.einsum("nik,n->ik", sign[:, :, None] * before * after, smooth)
        d_power += q.sum(axis=1) @ power_grads
        value += float(q.sum(axis=1) @ smooth)
    return Gradient(d_alloc, d_power, value)


def add_l1_penalty(gradient: Gradient, power, l1_weight: float) -> Gradient:
    """Penalized objective T~ - lambda * ||P||_1; powers are positive so the
    penalty gradient is -lambda on every coordinate."""
    if l1_weight == 0:
        return gradient
    p = np.asarray(power, dtype=np.float64)
    return replace(
        gradient,
        d_power=gradient.d_power - l1_weight,
        value=gradient.value - l1_weight * float(p.sum()),
    )


def central_difference(func: Callable[[np.ndarray], float], theta, step: float) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    for j in range(theta.size):
        shifted = theta.copy()
        shifted[j] = theta[j] + step
        f_plus = func(shifted)
        shifted[j] = theta[j] - step
        f_minus = func(shifted)
        grad[j] = (f_plus - f_minus) / (2 * step)
    return grad


def max_relative_error(analytic, numeric, floor: float = 1e-8) -> float:
    """Largest |analytic - numeric| / |analytic| over coordinates with |analytic| > floor."""
    analytic = np.ravel(analytic)
    numeric = np.ravel(numeric)
    keep = np.abs(analytic) > floor
    if not keep.any():
        return 0.0
    return float(np.max(np.abs(analytic[keep] - numeric[keep]) / np.abs(analytic[keep])))


def finite_diff_check(
    alloc,
    power,
    x,
    channel: ChannelMatrix,
    scenario: Scenario,
    step: float = 1e-6,
    objective_fn: Optional[Callable[[np.ndarray, np.ndarray], float]] = None,
    gradient_fn: Optional[Callable[[np.ndarray, np.ndarray], Gradient]] = None,
    floor: float = 1e-8,
) -> float:
    """Compare an analytic gradient against central differences over (A, P).

    By default checks grad_smoothed against smoothed_conditional_objective;
    `objective_fn` / `gradient_fn` replace them, both taking (A, P) arrays.

    Returns:
        float: Maximum relative error over coordinates with |analytic| > floor.
    """
    a = np.asarray(alloc, dtype=np.float64)
    p = np.asarray(power, dtype=np.float64)
    if objective_fn is None:
        objective_fn = lambda a_, p_: smoothed_conditional_objective(a_, p_, x, channel, scenario)  # noqa: E731
    if gradient_fn is None:
        gradient_fn = lambda a_, p_: grad_smoothed(a_, p_, x, channel, scenario)  # noqa: E731

    split = a.size

    def flat_objective(theta):
        return objective_fn(theta[:split].reshape(a.shape), theta[split:])

    numeric = central_difference(flat_objective, np.concatenate([a.ravel(), p]), step)
    analytic = gradient_fn(a, p)
    return max_relative_error(
        np.concatenate([np.ravel(analytic.d_alloc), np.ravel(analytic.d_power)]), numeric, floor
    )
