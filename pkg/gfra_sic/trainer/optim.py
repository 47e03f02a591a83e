"""
ADAGRAD ascent and the projections onto the feasible set of (A, P).

The allocation matrix and the power vector are held as float64 torch leaf
tensors driven by `torch.optim.Adagrad(maximize=True)`. Gradients come from the
analytic expressions in `gfra_sic.model.grad` and are written into `.grad`;
after each step the projected values are copied back in place so the
optimizer keeps its per-parameter state.
"""

from typing import Tuple

import numpy as np
import torch

from gfra_sic.model.grad import Gradient
from gfra_sic.model.system import AllocationMatrix, PowerVector
from gfra_sic.utils.constant import ADAGRAD_EPS


class AdagradState:
    """Parameters and squared-gradient accumulators of the ADAGRAD ascent.

    Per coordinate: G <- G + g^2, theta <- theta + mu * g / (sqrt(G) + eps).
    """

    def __init__(self, alloc, power, step_size: float, epsilon: float = ADAGRAD_EPS):
        if step_size <= 0:
            raise ValueError(f"step_size must be positive, got {step_size}")
        if epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.step_size = float(step_size)
        self.epsilon = float(epsilon)
        self.alloc = torch.tensor(np.asarray(alloc, dtype=np.float64), requires_grad=True)
        self.power = torch.tensor(np.asarray(power, dtype=np.float64), requires_grad=True)
        self.optimizer = torch.optim.Adagrad(
            [self.alloc, self.power],
            lr=self.step_size,
            eps=self.epsilon,
            maximize=True,
            foreach=False,
        )

    @property
    def accum_alloc(self) -> np.ndarray:
        return self.optimizer.state[self.alloc]["sum"].detach().numpy().copy()

    @property
    def accum_power(self) -> np.ndarray:
        return self.optimizer.state[self.power]["sum"].detach().numpy().copy()

    def params(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.alloc.detach().numpy().copy(), self.power.detach().numpy().copy()

    def load_params(self, alloc, power) -> None:
        """Overwrite the parameter values in place, keeping the accumulators."""
        with torch.no_grad():
            self.alloc.copy_(torch.from_numpy(np.asarray(alloc, dtype=np.float64)))
            self.power.copy_(torch.from_numpy(np.asarray(power, dtype=np.float64)))

    def step(self, gradient: Gradient) -> Tuple[np.ndarray, np.ndarray]:
        d_alloc = np.asarray(gradient.d_alloc, dtype=np.float64)
        d_power = np.asarray(gradient.d_power, dtype=np.float64)
        if d_alloc.shape != tuple(self.alloc.shape) or d_power.shape != tuple(self.power.shape):
            raise ValueError(
                f"gradient shapes {d_alloc.shape}, {d_power.shape} do not match "
                f"parameters {tuple(self.alloc.shape)}, {tuple(self.power.shape)}"
            )
        self.alloc.grad = torch.from_numpy(d_alloc.copy())
        self.power.grad = torch.from_numpy(d_power.copy())
        self.optimizer.step()
        self.optimizer.zero_grad(set_to_none=True)
        return self.params()


def adagrad_step(
    state: AdagradState, params, gradient: Gradient
) -> Tuple[np.ndarray, np.ndarray, AdagradState]:
    """One ascent step from `params` = (alloc, power); returns the unprojected update."""
    alloc, power = params
    state.load_params(alloc, power)
    new_alloc, new_power = state.step(gradient)
    return new_alloc, new_power, state


def _simplex_rows(values: np.ndarray) -> np.ndarray:
    # sort-and-threshold, one threshold per row
    k = values.shape[1]
    u = -np.sort(-values, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, k + 1)
    rho = np.count_nonzero(u - css / ind > 0, axis=1)
    theta = css[np.arange(values.shape[0]), rho - 1] / rho
    return np.maximum(values - theta[:, None], 0.0)


def project_simplex_rows(alloc) -> AllocationMatrix:
    """Euclidean projection of every row onto the probability simplex."""
    values = np.asarray(alloc, dtype=np.float64)
    if values.ndim != 2:
        raise ValueError(f"expected an N x K matrix, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("cannot project a matrix with non-finite entries")
    return AllocationMatrix(_simplex_rows(values))


def project_box(power, p_min, p_max: float) -> PowerVector:
    """Clamp each power into [P_min,i, p_max]."""
    return PowerVector(np.clip(np.asarray(power, dtype=np.float64), p_min, p_max), p_min, p_max)


def random_simplex_rows(n_devices: int, n_slots: int, rng: np.random.Generator) -> AllocationMatrix:
    """Rows drawn uniformly on the simplex (normalized exponentials)."""
    e = rng.exponential(size=(n_devices, n_slots))
    return AllocationMatrix(e / e.sum(axis=1, keepdims=True))
