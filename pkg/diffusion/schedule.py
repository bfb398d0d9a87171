"""
Diffusion noise schedules.

The reverse step is written in the form
    x_k = alpha_k * (x_{k+1} - lambda_k * eps_hat) + sigma_k * z
with the coefficients derived from the DDPM posterior of a beta schedule.
"""
from dataclasses import dataclass, field
from typing import Union

import numpy as np


class ScheduleError(Exception):
    """Raised for invalid schedules, out-of-range steps or nonmonotone step pairs."""
    pass


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    beta: np.ndarray
    alpha_bar: np.ndarray = field(init=False)
    alpha_bar_prev: np.ndarray = field(init=False)
    eq1_alpha: np.ndarray = field(init=False)
    eq1_lambda: np.ndarray = field(init=False)
    eq1_sigma: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or beta.size == 0:
            raise ScheduleError("beta must be a nonempty 1-D array")
        if np.any(beta <= 0) or np.any(beta >= 1):
            raise ScheduleError("beta values must lie in (0, 1)")
        if np.any(np.diff(beta) < 0):
            raise ScheduleError("beta must be nondecreasing")

        alpha_bar = np.cumprod(1.0 - beta)
        alpha_bar_prev = np.concatenate([[1.0], alpha_bar[:-1]])
        posterior_variance = (1.0 - alpha_bar_prev) / (1.0 - alpha_bar) * beta
        sigma = np.sqrt(posterior_variance)
        sigma[0] = 0.0

        object.__setattr__(self, "beta", _readonly(beta))
        object.__setattr__(self, "alpha_bar", _readonly(alpha_bar))
        object.__setattr__(self, "alpha_bar_prev", _readonly(alpha_bar_prev))
        object.__setattr__(self, "eq1_alpha", _readonly(1.0 / np.sqrt(1.0 - beta)))
        object.__setattr__(self, "eq1_lambda", _readonly(beta / np.sqrt(1.0 - alpha_bar)))
        object.__setattr__(self, "eq1_sigma", _readonly(sigma))

    @classmethod
    def linear(cls, steps: int = 100, beta_start: float = 1e-4, beta_end: float = 2e-2) -> "NoiseSchedule":
        return cls(np.linspace(beta_start, beta_end, steps))

    @property
    def K(self) -> int:
        return int(self.beta.size)

    def check_step(self, k: Union[int, np.ndarray]) -> None:
        k = np.asarray(k)
        if np.any(k < 0) or np.any(k >= self.K):
            raise ScheduleError(f"diffusion step {k.tolist()} outside [0, {self.K})")
