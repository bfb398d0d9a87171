"""
Behavior-cloning training of the diffusion policy on demonstration windows.
"""
import logging
from typing import Optional

import numpy as np
from tqdm import tqdm

from core import Adam, AdamState, Tensor, backward, no_grad
from diffusion import denoising_loss
from envs import DemoDataset
from model import PolicyConfig
from policy.diffusion_policy import DiffusionPolicy, TrainingState
from policy.normalizer import MinMaxNormalizer
from utils import SeedStreams

logger = logging.getLogger(__name__)


class TrainingError(Exception):
    """Raised when training cannot start (empty dataset, mismatched image size)."""
    pass


def sliding_windows(dataset: DemoDataset) -> np.ndarray:
    """(episode, t) for every timestep of every episode, shape (N, 2)."""
    pairs = [(e, t) for e, ep in enumerate(dataset.episodes) for t in range(len(ep))]
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def build_batch(dataset: DemoDataset, windows: np.ndarray, config: PolicyConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gather observation stacks, agent states and action windows.

    Frame history is padded by repeating the first frame; action windows
    past the episode end repeat the last action.

    Returns:
        frames (b, T_o, 3, H, W) in [0, 1], states (b, 4), actions (b, L_a, D_a) raw
    """
    frames, states, actions = [], [], []
    for e, t in windows:
        ep = dataset.episodes[int(e)]
        last = len(ep) - 1
        obs_idx = np.clip(np.arange(t - config.obs_horizon + 1, t + 1), 0, last)
        act_idx = np.clip(np.arange(t, t + config.action_horizon), 0, last)
        frames.append(ep.frames[obs_idx])
        states.append(ep.states[t])
        actions.append(ep.actions[act_idx])
    return (
        np.stack(frames).astype(np.float64) / 255.0,
        np.stack(states).astype(np.float64),
        np.stack(actions).astype(np.float64),
    )


def _check_dataset(dataset: DemoDataset, config: PolicyConfig) -> None:
    if len(dataset) == 0 or dataset.total_steps == 0:
        raise TrainingError("cannot train on an empty dataset")
    size = dataset.episodes[0].frames.shape[-1]
    if size != config.image_size:
        raise TrainingError(f"dataset frames are {size}px but the policy expects {config.image_size}px")


def train_policy(
    dataset: DemoDataset,
    epochs: int,
    batch: int,
    lr: float,
    seed: int,
    config: Optional[PolicyConfig] = None,
    resume: Optional[DiffusionPolicy] = None,
) -> DiffusionPolicy:
    """
    Adam on the denoising loss over sliding (observation, trajectory) windows.

    Each epoch draws its shuffle and diffusion noise from its own
    generator, so training resumed from a checkpoint after epoch e
    reproduces uninterrupted training exactly. `epochs` is the total
    epoch count, including epochs already completed by `resume`.

    Raises:
        TrainingError: If the dataset is empty or its frames do not fit the policy
    """
    streams = SeedStreams(seed)
    if resume is not None:
        policy = resume
        if policy.training_state is None:
            raise TrainingError("resume policy carries no training state")
        config = policy.config
    else:
        config = config or PolicyConfig()
    _check_dataset(dataset, config)

    if resume is None:
        policy = DiffusionPolicy.initialize(
            config,
            streams.generator("train"),
            MinMaxNormalizer.fit(dataset.all_actions()),
            MinMaxNormalizer.fit(dataset.all_states()),
        )
        policy.training_state = TrainingState(AdamState.zeros_like(list(policy.parameters().values())))

    state = policy.training_state
    optimizer = Adam(list(policy.parameters().values()), lr=lr)
    optimizer.state = state.optimizer
    windows = sliding_windows(dataset)

    epoch_range = range(state.epochs_completed, epochs)
    for epoch in tqdm(epoch_range, desc="train", disable=not logger.isEnabledFor(logging.INFO)):
        rng = streams.generator("train", epoch)
        order = rng.permutation(len(windows))
        losses = []
        for start in range(0, len(order), batch):
            frames, states, actions = build_batch(dataset, windows[order[start:start + batch]], config)
            cond = policy.condition(Tensor(frames), states)
            x0 = Tensor(policy.action_normalizer.normalize(actions))
            loss = denoising_loss(policy.schedule, policy.denoiser, x0, cond, rng)
            optimizer.zero_grad()
            backward(loss)
            optimizer.step()
            losses.append(loss.item())
        state.epochs_completed = epoch + 1
        state.epoch_losses.append(float(np.mean(losses)))
        logger.info(f"epoch {epoch + 1}/{epochs} mean denoising loss {state.epoch_losses[-1]:.4f}")

    return policy


def evaluate_denoising_loss(policy: DiffusionPolicy, dataset: DemoDataset, seed: int,
                            batch: int = 64, max_windows: Optional[int] = None) -> float:
    """Mean denoising loss over dataset windows with fresh (k, eps) draws; no gradients."""
    _check_dataset(dataset, policy.config)
    rng = SeedStreams(seed).generator("eval")
    windows = sliding_windows(dataset)
    if max_windows is not None and max_windows < len(windows):
        windows = windows[np.sort(rng.choice(len(windows), size=max_windows, replace=False))]
    total, count = 0.0, 0
    with no_grad():
        for start in range(0, len(windows), batch):
            chunk = windows[start:start + batch]
            frames, states, actions = build_batch(dataset, chunk, policy.config)
            cond = policy.condition(Tensor(frames), states)
            x0 = Tensor(policy.action_normalizer.normalize(actions))
            loss = denoising_loss(policy.schedule, policy.denoiser, x0, cond, rng)
            total += loss.item() * len(chunk)
            count += len(chunk)
    return total / count
