"""
Global L-inf PGD attacks on observation frames, online and offline, plus the random-noise baseline.
"""
import logging
from typing import Optional, Union

import numpy as np
from tqdm import tqdm

from attacks.artifacts import GlobalPerturbation, check_budget
from attacks.losses import noise_prediction_loss, target_trajectory
from core import Tensor, add, backward, clamp, expand, no_grad
from envs import DemoDataset
from model import AttackConfig, AttackMode
from policy import DiffusionPolicy, Observation, build_batch, sliding_windows

logger = logging.getLogger(__name__)


def pgd_update(delta: np.ndarray, grad: np.ndarray, alpha: float, sigma: float) -> np.ndarray:
    """delta <- clip(delta - alpha * sign(grad), -sigma, sigma)."""
    return np.clip(delta - alpha * np.sign(grad), -sigma, sigma)


def perturbed_frames(frames: np.ndarray, delta: Tensor) -> Tensor:
    """clip(I + delta, 0, 1), with delta expanded over leading axes when it is shared."""
    if delta.shape != frames.shape:
        delta = expand(delta, frames.shape)
    return clamp(add(Tensor(frames), delta), 0.0, 1.0)


def reference_trajectory(policy: DiffusionPolicy, obs: Observation, cfg: AttackConfig,
                         rng: np.random.Generator) -> np.ndarray:
    """tau_target for targeted attacks, a clean policy sample tau* otherwise; shape (1, L_a, D_a)."""
    if AttackMode(cfg.mode) == AttackMode.TARGETED:
        return target_trajectory(cfg, policy.trajectory_shape)[None]
    with no_grad():
        return policy.sample_normalized(policy.observation_condition(obs), rng=rng).data


def attack_online_global(policy: DiffusionPolicy, obs: Observation, cfg: AttackConfig,
                         rng: Optional[np.random.Generator] = None) -> GlobalPerturbation:
    """
    Per-observation PGD on the noise-prediction loss.

    One delta per frame slot. (k, eps) are redrawn every step; tau* is
    sampled once up front unless `cfg.resample_reference` is set.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    delta = np.zeros_like(obs.frames)
    tau = reference_trajectory(policy, obs, cfg, rng)
    for i in range(cfg.steps):
        if i > 0 and cfg.resample_reference and AttackMode(cfg.mode) == AttackMode.UNTARGETED:
            tau = reference_trajectory(policy, obs, cfg, rng)
        leaf = Tensor(delta, requires_grad=True)
        cond = policy.observation_condition(obs, perturbed_frames(obs.frames, leaf))
        loss = noise_prediction_loss(policy, cond, tau, cfg.mode, rng, cfg.draws_per_step, cfg.literal_forward)
        backward(loss)
        delta = pgd_update(delta, leaf.grad, cfg.alpha, cfg.sigma)
        check_budget(delta, cfg.sigma)
        logger.debug(f"online pgd step {i + 1}/{cfg.steps} loss {loss.item():.5f}")
    return GlobalPerturbation(delta, cfg.sigma, {"attack": "online", "mode": AttackMode(cfg.mode).value,
                                                 "alpha": cfg.alpha, "steps": cfg.steps})


def dataset_minibatches(dataset: DemoDataset, policy: DiffusionPolicy, epochs: int, batch: int,
                        rng: np.random.Generator):
    """Yield (epoch, frames, states, normalized actions) over shuffled dataset windows."""
    windows = sliding_windows(dataset)
    for epoch in range(epochs):
        order = rng.permutation(len(windows))
        for start in range(0, len(order), batch):
            frames, states, actions = build_batch(dataset, windows[order[start:start + batch]], policy.config)
            yield epoch, frames, states, policy.action_normalizer.normalize(actions)


def batch_reference(policy: DiffusionPolicy, cfg: AttackConfig, actions: np.ndarray) -> np.ndarray:
    """Targeted: the target for every row. Untargeted: the dataset trajectories themselves."""
    if AttackMode(cfg.mode) == AttackMode.TARGETED:
        target = target_trajectory(cfg, policy.trajectory_shape)
        return np.broadcast_to(target, actions.shape).copy()
    return actions


def attack_offline_global(policy: DiffusionPolicy, dataset: DemoDataset, cfg: AttackConfig,
                          rng: Optional[np.random.Generator] = None, epochs: Optional[int] = None,
                          batch: Optional[int] = None) -> GlobalPerturbation:
    """
    One (3, H, W) delta shared by every frame, trained by PGD over dataset minibatches.

    Uses `cfg.dataset_alpha` as the step size.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    epochs = cfg.epochs if epochs is None else epochs
    batch = cfg.batch if batch is None else batch
    size = policy.config.image_size
    delta = np.zeros((3, size, size))
    epoch_losses: list[list[float]] = [[] for _ in range(epochs)]

    steps = tqdm(dataset_minibatches(dataset, policy, epochs, batch, rng), desc="offline",
                 disable=not logger.isEnabledFor(logging.INFO))
    for epoch, frames, states, actions in steps:
        leaf = Tensor(delta, requires_grad=True)
        cond = policy.condition(perturbed_frames(frames, leaf), states)
        loss = noise_prediction_loss(policy, cond, batch_reference(policy, cfg, actions), cfg.mode, rng,
                                     cfg.draws_per_step, cfg.literal_forward)
        backward(loss)
        delta = pgd_update(delta, leaf.grad, cfg.dataset_alpha, cfg.sigma)
        check_budget(delta, cfg.sigma)
        epoch_losses[epoch].append(loss.item())

    means = [float(np.mean(losses)) for losses in epoch_losses if losses]
    for epoch, value in enumerate(means):
        logger.info(f"offline epoch {epoch + 1}/{epochs} mean adversarial loss {value:.5f}")
    if epochs and float(np.max(np.abs(delta))) < cfg.sigma - 1e-9:
        logger.warning(f"Offline perturbation did not saturate its budget: "
                       f"|delta|_inf = {np.max(np.abs(delta)):.6f} < sigma = {cfg.sigma}")
    return GlobalPerturbation(delta, cfg.sigma, {
        "attack": "offline", "mode": AttackMode(cfg.mode).value, "alpha": cfg.dataset_alpha,
        "epochs": epochs, "batch": batch, "epoch_losses": means,
    })


def random_noise_baseline(shape: tuple[int, ...], sigma: float,
                          seed: Union[int, np.random.Generator, None] = None) -> GlobalPerturbation:
    """delta = clip(sigma * N(0, I), -sigma, sigma)."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    delta = np.clip(sigma * rng.standard_normal(shape), -sigma, sigma)
    return GlobalPerturbation(delta, sigma, {"attack": "random-noise"})
