"""
Attack objectives: the one-step noise-prediction loss and the end-to-end action loss.

Both carry a mode sign: +1 for targeted (pull toward the target
trajectory), -1 for untargeted (push away from a good trajectory), and
PGD always descends the signed loss.
"""
from typing import Optional

import numpy as np

from core import DimensionError, Tensor, add, mse, no_grad, scale
from diffusion import SamplingNoise, SchedulerSpec, forward_sample
from model import AttackConfig, AttackMode
from policy import DiffusionPolicy


def mode_sign(mode: AttackMode) -> float:
    return 1.0 if AttackMode(mode) == AttackMode.TARGETED else -1.0


def target_trajectory(cfg: AttackConfig, shape: tuple[int, int]) -> np.ndarray:
    """The normalized target trajectory (all ones unless configured)."""
    if cfg.target is None:
        return np.ones(shape)
    target = np.asarray(cfg.target, dtype=np.float64)
    if target.shape != tuple(shape):
        raise DimensionError(f"target trajectory must have shape {tuple(shape)}, got {target.shape}")
    return target


def noise_prediction_loss(
    policy: DiffusionPolicy,
    cond: Tensor,
    tau_ref: np.ndarray,
    mode: AttackMode,
    rng: np.random.Generator,
    draws: int = 1,
    literal: bool = False,
) -> Tensor:
    """
    s * ||eps_theta(forward_sample(tau_ref, k, eps), k, cond) - eps||^2 averaged over `draws`.

    `cond` rows pair with `tau_ref` rows; (k, eps) are drawn per row.
    """
    tau = Tensor(tau_ref)
    n = tau_ref.shape[0]
    total: Optional[Tensor] = None
    for _ in range(draws):
        k = rng.integers(0, policy.schedule.K, size=n)
        eps = Tensor(rng.standard_normal(tau_ref.shape))
        x_k = forward_sample(policy.schedule, tau, k, eps, literal=literal)
        term = mse(policy.denoiser.predict(x_k, k, cond), eps)
        total = term if total is None else add(total, term)
    return scale(total, mode_sign(mode) / draws)


def adv_loss(
    policy: DiffusionPolicy,
    frames: Tensor,
    agent_state: np.ndarray,
    tau_ref: np.ndarray,
    mode: AttackMode,
    rng: np.random.Generator,
    draws: int = 1,
    literal: bool = False,
) -> Tensor:
    """Noise-prediction attack loss on (possibly perturbed) frames (n, T_o, 3, H, W)."""
    cond = policy.condition(frames, agent_state)
    return noise_prediction_loss(policy, cond, tau_ref, mode, rng, draws, literal)


def expected_adv_loss(
    policy: DiffusionPolicy,
    frames: np.ndarray,
    agent_state: np.ndarray,
    tau_ref: np.ndarray,
    mode: AttackMode,
    rng: np.random.Generator,
    draws: int = 256,
) -> float:
    """Monte-Carlo estimate of the attack loss with `draws` fresh (k, eps) pairs per row."""
    with no_grad():
        cond = policy.condition(Tensor(frames), agent_state)
        rows = np.repeat(cond.data, draws, axis=0)
        taus = np.repeat(np.asarray(tau_ref, dtype=np.float64), draws, axis=0)
        return noise_prediction_loss(policy, Tensor(rows), taus, mode, rng).item()


def end2end_loss(
    policy: DiffusionPolicy,
    cond: Tensor,
    tau_ref: np.ndarray,
    mode: AttackMode,
    noise: SamplingNoise,
    scheduler: SchedulerSpec,
) -> Tensor:
    """s * ||pi_theta(cond) - tau_ref||^2 with every sampling draw fixed by `noise`."""
    generated = policy.sample_normalized(cond, noise=noise, scheduler=scheduler)
    return scale(mse(generated, Tensor(tau_ref)), mode_sign(mode))
