import numpy as np
import pytest

from envs import DemoDataset, Episode
from model import AttackConfig, EnvConfig, PolicyConfig
from policy import DiffusionPolicy, MinMaxNormalizer, Observation

RESOLUTION = 16


@pytest.fixture
def tiny_config() -> PolicyConfig:
    return PolicyConfig(
        obs_horizon=2,
        action_horizon=4,
        execute_steps=2,
        image_size=RESOLUTION,
        encoder_channels=[4, 8],
        time_embedding_dim=8,
        hidden_width=16,
        diffusion_steps=10,
        inference_scheduler="ddim3",
    )


@pytest.fixture
def tiny_env() -> EnvConfig:
    return EnvConfig(resolution=RESOLUTION, episode_len=6)


@pytest.fixture
def tiny_policy(tiny_config) -> DiffusionPolicy:
    actions = MinMaxNormalizer(-np.ones(2), np.ones(2))
    states = MinMaxNormalizer(np.array([0.0, 0.0, -0.02, -0.02]), np.array([1.0, 1.0, 0.02, 0.02]))
    return DiffusionPolicy.initialize(tiny_config, np.random.default_rng(0), actions, states)


@pytest.fixture
def tiny_dataset() -> DemoDataset:
    """Two short synthetic episodes; contents are random but valid."""
    rng = np.random.default_rng(7)
    episodes = []
    for i, length in enumerate((5, 4)):
        episodes.append(Episode(
            frames=rng.integers(0, 256, size=(length, 3, RESOLUTION, RESOLUTION), dtype=np.uint8),
            states=np.concatenate([rng.uniform(0, 1, (length, 2)), rng.uniform(-0.02, 0.02, (length, 2))],
                                  axis=1).astype(np.float32),
            actions=rng.uniform(-1, 1, (length, 2)).astype(np.float32),
            seed=i,
        ))
    return DemoDataset(episodes, {"source": "synthetic"})


@pytest.fixture
def tiny_observation() -> Observation:
    rng = np.random.default_rng(3)
    return Observation(rng.uniform(0.1, 0.9, (2, 3, RESOLUTION, RESOLUTION)), np.array([0.3, 0.4, 0.0, 0.01]))


@pytest.fixture
def fast_attack() -> AttackConfig:
    return AttackConfig(sigma=0.03, alpha=0.01, steps=3, epochs=1, batch=4, patch_pixels=5,
                        scheduler="ddim3", dataset_alpha=0.01)
