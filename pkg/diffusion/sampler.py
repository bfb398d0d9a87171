"""
Forward noising, DDPM/DDIM reverse steps, sampling chains and the denoising loss.

All functions are written in `core` tensor ops so a chain stays
differentiable with respect to whatever the denoiser conditions on.
Samples are batched: the leading axis indexes independent samples.
"""
import re
from dataclasses import dataclass, field
from typing import Any, Literal, Optional, Protocol, Union

import numpy as np

from core import DimensionError, Tensor, add, mse, scale, sub
from diffusion.schedule import NoiseSchedule, ScheduleError

StepIndex = Union[int, np.ndarray]


class Denoiser(Protocol):
    def predict(self, x_k: Tensor, k: StepIndex, cond: Any) -> Tensor:
        """Predict the noise in x_k; output has the shape of x_k."""
        ...


@dataclass(frozen=True)
class SchedulerSpec:
    kind: Literal["ddpm", "ddim"] = "ddim"
    steps: int = 8

    @classmethod
    def parse(cls, text: str) -> "SchedulerSpec":
        text = text.strip().lower()
        if text == "ddpm":
            return cls("ddpm", 0)
        match = re.fullmatch(r"ddim\(?(\d+)\)?", text)
        if not match or int(match.group(1)) < 1:
            raise ScheduleError(f"Unknown scheduler '{text}'; expected 'ddpm' or 'ddim<n>'")
        return cls("ddim", int(match.group(1)))

    def timesteps(self, schedule: NoiseSchedule) -> list[int]:
        if self.kind == "ddpm":
            return list(range(schedule.K - 1, -1, -1))
        n = min(self.steps, schedule.K)
        points = np.linspace(schedule.K - 1, 0, n).round().astype(int)
        return [int(k) for k in dict.fromkeys(points.tolist())]

    def __str__(self) -> str:
        return "ddpm" if self.kind == "ddpm" else f"ddim{self.steps}"


@dataclass
class SamplingNoise:
    """Every random draw of one sampling chain, so a chain can be replayed exactly."""
    initial: np.ndarray
    steps: dict[int, np.ndarray] = field(default_factory=dict)

    @classmethod
    def draw(cls, shape: tuple[int, ...], schedule: NoiseSchedule, scheduler: SchedulerSpec,
             rng: np.random.Generator) -> "SamplingNoise":
        initial = rng.standard_normal(shape)
        steps = {}
        if scheduler.kind == "ddpm":
            for k in range(schedule.K - 1, -1, -1):
                if schedule.eq1_sigma[k] > 0:
                    steps[k] = rng.standard_normal(shape)
        return cls(initial, steps)


def _per_sample(values: np.ndarray, k: StepIndex, ndim: int) -> Union[float, np.ndarray]:
    if np.ndim(k) == 0:
        return float(values[int(k)])
    return values[np.asarray(k)].reshape((-1,) + (1,) * (ndim - 1))


def forward_sample(schedule: NoiseSchedule, x0: Tensor, k: StepIndex, eps: Tensor,
                   literal: bool = False) -> Tensor:
    """
    q-sample: sqrt(alpha_bar[k]) * x0 + sqrt(1 - alpha_bar[k]) * eps.

    `literal=True` returns the unscaled x0 + eps form instead.
    k may be a scalar or one index per leading-axis sample.
    """
    if eps.shape != x0.shape:
        raise DimensionError(f"forward_sample: eps shape {eps.shape} != x0 shape {x0.shape}")
    schedule.check_step(k)
    if literal:
        return add(x0, eps)
    signal = _per_sample(np.sqrt(schedule.alpha_bar), k, x0.ndim)
    noise = _per_sample(np.sqrt(1.0 - schedule.alpha_bar), k, x0.ndim)
    return add(scale(x0, signal), scale(eps, noise))


def predict_x0(schedule: NoiseSchedule, x_k: Tensor, k: int, eps_hat: Tensor) -> Tensor:
    ab = schedule.alpha_bar[k]
    return scale(sub(x_k, scale(eps_hat, np.sqrt(1.0 - ab))), 1.0 / np.sqrt(ab))


def ddpm_step(schedule: NoiseSchedule, x_next: Tensor, k: int, denoiser: Denoiser, cond: Any,
              rng: Optional[np.random.Generator] = None, noise: Optional[np.ndarray] = None) -> Tensor:
    """One ancestral step from noise level k to level k-1 (the clean sample when k == 0)."""
    schedule.check_step(k)
    eps_hat = denoiser.predict(x_next, k, cond)
    mean = scale(sub(x_next, scale(eps_hat, schedule.eq1_lambda[k])), schedule.eq1_alpha[k])
    sigma = schedule.eq1_sigma[k]
    if sigma == 0:
        return mean
    if noise is None:
        if rng is None:
            raise ScheduleError(f"ddpm_step at k={k} needs an rng or explicit noise")
        noise = rng.standard_normal(x_next.shape)
    return add(mean, Tensor(sigma * noise))


def ddim_step(schedule: NoiseSchedule, x_next: Tensor, k_from: int, k_to: int,
              denoiser: Denoiser, cond: Any) -> Tensor:
    """Deterministic (eta = 0) DDIM update from level k_from to level k_to."""
    if not k_from > k_to >= 0:
        raise ScheduleError(f"ddim_step needs k_from > k_to >= 0, got {k_from} -> {k_to}")
    schedule.check_step(k_from)
    eps_hat = denoiser.predict(x_next, k_from, cond)
    x0 = predict_x0(schedule, x_next, k_from, eps_hat)
    ab_to = schedule.alpha_bar[k_to]
    return add(scale(x0, np.sqrt(ab_to)), scale(eps_hat, np.sqrt(1.0 - ab_to)))


def sample_loop(schedule: NoiseSchedule, denoiser: Denoiser, cond: Any, shape: tuple[int, ...],
                scheduler: SchedulerSpec, rng: Optional[np.random.Generator] = None,
                noise: Optional[SamplingNoise] = None) -> Tensor:
    """Drive x_K ~ N(0, I) through the reverse chain to x_0."""
    if noise is None:
        if rng is None:
            raise ScheduleError("sample_loop needs an rng or pre-drawn noise")
        noise = SamplingNoise.draw(shape, schedule, scheduler, rng)
    if noise.initial.shape != tuple(shape):
        raise DimensionError(f"sample_loop: noise shape {noise.initial.shape} != {shape}")

    x = Tensor(noise.initial)
    if scheduler.kind == "ddpm":
        for k in range(schedule.K - 1, -1, -1):
            x = ddpm_step(schedule, x, k, denoiser, cond, noise=noise.steps.get(k))
        return x

    timesteps = scheduler.timesteps(schedule)
    for k_from, k_to in zip(timesteps[:-1], timesteps[1:]):
        x = ddim_step(schedule, x, k_from, k_to, denoiser, cond)
    last = timesteps[-1]
    return predict_x0(schedule, x, last, denoiser.predict(x, last, cond))


def denoising_loss(schedule: NoiseSchedule, denoiser: Denoiser, x0: Tensor, cond: Any,
                   rng: np.random.Generator, literal: bool = False) -> Tensor:
    """mse(eps_theta(q_sample(x0, k, eps), k, cond), eps) with k ~ U[0, K), eps ~ N(0, I) per sample."""
    k = rng.integers(0, schedule.K, size=x0.shape[0])
    eps = Tensor(rng.standard_normal(x0.shape))
    x_k = forward_sample(schedule, x0, k, eps, literal=literal)
    return mse(denoiser.predict(x_k, k, cond), eps)
