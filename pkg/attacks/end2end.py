"""
End-to-end baseline: PGD through the whole sampling chain.
"""
import logging
from typing import Optional

import numpy as np

from attacks.artifacts import GlobalPerturbation, check_budget
from attacks.global_attacks import perturbed_frames, pgd_update
from attacks.losses import end2end_loss, target_trajectory
from core import Tensor, backward, no_grad
from diffusion import SamplingNoise, SchedulerSpec
from model import AttackConfig, AttackMode
from policy import DiffusionPolicy, Observation

logger = logging.getLogger(__name__)


def end2end_attack(policy: DiffusionPolicy, obs: Observation, cfg: AttackConfig,
                   rng: Optional[np.random.Generator] = None,
                   scheduler: Optional[SchedulerSpec] = None) -> GlobalPerturbation:
    """
    PGD on s * ||pi_theta(clip(I + delta, 0, 1)) - tau_ref||^2.

    The chain's initial noise and per-step noises are drawn once and
    replayed every iteration, so each step differentiates the same function.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    scheduler = scheduler or SchedulerSpec.parse(cfg.scheduler)
    noise = SamplingNoise.draw((1,) + policy.trajectory_shape, policy.schedule, scheduler, rng)

    if AttackMode(cfg.mode) == AttackMode.TARGETED:
        tau = target_trajectory(cfg, policy.trajectory_shape)[None]
    else:
        with no_grad():
            tau = policy.sample_normalized(policy.observation_condition(obs), noise=noise, scheduler=scheduler).data

    delta = np.zeros_like(obs.frames)
    for i in range(cfg.steps):
        leaf = Tensor(delta, requires_grad=True)
        cond = policy.observation_condition(obs, perturbed_frames(obs.frames, leaf))
        loss = end2end_loss(policy, cond, tau, cfg.mode, noise, scheduler)
        backward(loss)
        delta = pgd_update(delta, leaf.grad, cfg.alpha, cfg.sigma)
        check_budget(delta, cfg.sigma)
        logger.debug(f"end-to-end ({scheduler}) pgd step {i + 1}/{cfg.steps} loss {loss.item():.5f}")
    return GlobalPerturbation(delta, cfg.sigma, {"attack": f"end2end-{scheduler}", "mode": AttackMode(cfg.mode).value,
                                                 "alpha": cfg.alpha, "steps": cfg.steps})
