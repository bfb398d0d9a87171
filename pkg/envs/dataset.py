"""
Demonstration datasets: generation with the scripted expert and file round trips.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
from tqdm import tqdm

from envs.expert import scripted_expert
from envs.push import SUCCESS_THRESHOLD, PushEnv
from envs.render import quantize_frame
from utils import CheckpointContainer, CheckpointError, SeedStreams

logger = logging.getLogger(__name__)

DEMO_STOP_COVERAGE = 0.95
MAX_FAILURE_RATE = 0.2


class DatasetGenerationError(Exception):
    """Raised when the expert fails on more than 20% of attempted episodes."""
    pass


@dataclass(eq=False)
class Episode:
    """
    One demonstration.

    frames[t] (uint8, 3xHxW) and states[t] are observed before actions[t]
    is applied; all three share the leading extent T.
    """
    frames: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    seed: int

    def __len__(self) -> int:
        return int(self.actions.shape[0])


@dataclass(eq=False)
class DemoDataset:
    episodes: list[Episode]
    metadata: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.episodes)

    @property
    def total_steps(self) -> int:
        return sum(len(ep) for ep in self.episodes)

    def all_actions(self) -> np.ndarray:
        return np.concatenate([ep.actions for ep in self.episodes]).astype(np.float64)

    def all_states(self) -> np.ndarray:
        return np.concatenate([ep.states for ep in self.episodes]).astype(np.float64)

    def save(self, path: Union[str, Path]) -> Path:
        tensors = {}
        for i, ep in enumerate(self.episodes):
            tensors[f"ep{i:05d}/frames"] = ep.frames
            tensors[f"ep{i:05d}/states"] = ep.states
            tensors[f"ep{i:05d}/actions"] = ep.actions
        meta = {
            **self.metadata,
            "kind": "dataset",
            "episodes": len(self.episodes),
            "episode_seeds": [ep.seed for ep in self.episodes],
        }
        return CheckpointContainer(tensors, meta).save(path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DemoDataset":
        container = CheckpointContainer.load(path)
        meta = dict(container.metadata)
        if meta.get("kind") != "dataset":
            raise CheckpointError(f"{path} is not a dataset file (kind={meta.get('kind')!r})")
        episodes = []
        try:
            for i, seed in enumerate(meta["episode_seeds"]):
                episodes.append(Episode(
                    frames=container.tensors[f"ep{i:05d}/frames"],
                    states=container.tensors[f"ep{i:05d}/states"],
                    actions=container.tensors[f"ep{i:05d}/actions"],
                    seed=int(seed),
                ))
        except KeyError as e:
            raise CheckpointError(f"{path} is missing dataset tensor {e}")
        return cls(episodes, meta)


def run_expert_episode(seed: int, max_steps: int, resolution: int = 64) -> tuple[Episode, float]:
    """Roll the expert until the block is well inside the goal or max_steps elapse."""
    env = PushEnv(seed, resolution)
    frames, states, actions = [], [], []
    for _ in range(max_steps):
        frames.append(quantize_frame(env.render()))
        states.append(env.state.agent_state)
        action = scripted_expert(env.state)
        actions.append(action)
        if env.step(action) >= DEMO_STOP_COVERAGE:
            break
    episode = Episode(
        frames=np.stack(frames),
        states=np.stack(states).astype(np.float32),
        actions=np.stack(actions).astype(np.float32),
        seed=seed,
    )
    score, _ = env.score()
    return episode, score


def generate_dataset(
    n_episodes: int,
    max_steps: int,
    seed: int,
    resolution: int = 64,
    metadata: Optional[dict[str, Any]] = None,
) -> DemoDataset:
    """
    Collect `n_episodes` successful expert demonstrations.

    Episode attempts use seeds from the "env" stream of `seed`; failed
    attempts are dropped.

    Raises:
        ValueError: If n_episodes is not positive
        DatasetGenerationError: If more than 20% of attempts fail
    """
    if n_episodes <= 0:
        raise ValueError("n_episodes must be positive")
    streams = SeedStreams(seed)
    episodes: list[Episode] = []
    failures = 0
    attempt = 0
    with tqdm(total=n_episodes, desc="demos", disable=not logger.isEnabledFor(logging.INFO)) as bar:
        while len(episodes) < n_episodes:
            episode_seed = streams.seed("env", attempt)
            attempt += 1
            episode, score = run_expert_episode(episode_seed, max_steps, resolution)
            if score >= SUCCESS_THRESHOLD:
                episodes.append(episode)
                bar.update(1)
                continue
            failures += 1
            logger.warning(f"Expert failed on seed {episode_seed} (score {score:.3f})")
            if failures / (n_episodes + failures) > MAX_FAILURE_RATE:
                raise DatasetGenerationError(
                    f"Expert failed {failures} of {attempt} episodes; env or expert is misconfigured"
                )

    logger.info(f"Generated {len(episodes)} demos ({sum(len(e) for e in episodes)} steps, {failures} failures)")
    meta = {**(metadata or {}), "seed": seed, "attempts": attempt, "failures": failures,
            "max_steps": max_steps, "resolution": resolution}
    return DemoDataset(episodes, meta)
