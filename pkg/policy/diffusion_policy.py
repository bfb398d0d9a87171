"""
The visual diffusion policy: encoder, conditional denoiser, schedule and normalizers.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from core import AdamState, DimensionError, Tensor, clamp, concat, no_grad, reshape
from diffusion import NoiseSchedule, SamplingNoise, SchedulerSpec, sample_loop
from model import PolicyConfig
from policy.networks import ConditionalDenoiser, VisionEncoder
from policy.normalizer import MinMaxNormalizer
from utils import CheckpointContainer, CheckpointError

logger = logging.getLogger(__name__)

STATE_DIM = 4
CHANNELS = 3


@dataclass
class Observation:
    """Stacked RGB frames (T_o, 3, H, W) in [0, 1] plus the agent position and velocity."""
    frames: np.ndarray
    agent_state: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.agent_state = np.asarray(self.agent_state, dtype=np.float64)
        if self.frames.ndim != 4 or self.frames.shape[1] != CHANNELS:
            raise DimensionError(f"observation frames must be (T_o, 3, H, W), got {self.frames.shape}")
        if self.agent_state.shape != (STATE_DIM,):
            raise DimensionError(f"agent state must have shape ({STATE_DIM},), got {self.agent_state.shape}")
        if self.frames.size and (self.frames.min() < 0.0 or self.frames.max() > 1.0):
            raise ValueError("observation pixels must lie in [0, 1]")

    def with_frames(self, frames: np.ndarray) -> "Observation":
        return Observation(frames, self.agent_state)


@dataclass
class TrainingState:
    """Everything beyond the weights needed to continue training exactly."""
    optimizer: AdamState
    epochs_completed: int = 0
    epoch_losses: list[float] = field(default_factory=list)


class DiffusionPolicy:
    """
    pi_theta: maps an observation to a denoised action trajectory.

    Trajectories live in normalized action space inside the policy;
    `generate_action` clamps to +-action_clip and denormalizes on return.
    A policy is read-only once trained, so threads may share it.
    """

    def __init__(self, config: PolicyConfig, encoder: VisionEncoder, denoiser: ConditionalDenoiser,
                 action_normalizer: MinMaxNormalizer, state_normalizer: MinMaxNormalizer):
        self.config = config
        self.encoder = encoder
        self.denoiser = denoiser
        self.action_normalizer = action_normalizer
        self.state_normalizer = state_normalizer
        self.schedule = NoiseSchedule.linear(config.diffusion_steps, config.beta_start, config.beta_end)
        self.scheduler = SchedulerSpec.parse(config.inference_scheduler)
        self.training_state: Optional[TrainingState] = None

    @classmethod
    def initialize(cls, config: PolicyConfig, rng: np.random.Generator,
                   action_normalizer: Optional[MinMaxNormalizer] = None,
                   state_normalizer: Optional[MinMaxNormalizer] = None) -> "DiffusionPolicy":
        encoder = VisionEncoder(config.obs_horizon * CHANNELS, config.encoder_channels, rng)
        denoiser = ConditionalDenoiser(
            config.action_horizon, config.action_dim, encoder.out_dim + STATE_DIM,
            config.time_embedding_dim, config.hidden_width, rng,
        )
        identity_actions = MinMaxNormalizer(-np.ones(config.action_dim), np.ones(config.action_dim))
        identity_states = MinMaxNormalizer(-np.ones(STATE_DIM), np.ones(STATE_DIM))
        return cls(config, encoder, denoiser, action_normalizer or identity_actions,
                   state_normalizer or identity_states)

    @property
    def trajectory_shape(self) -> tuple[int, int]:
        return self.config.action_horizon, self.config.action_dim

    def parameters(self) -> dict[str, Tensor]:
        return {**self.encoder.parameters(), **self.denoiser.parameters()}

    # ============ Conditioning ============

    def encode(self, frames: Tensor) -> Tensor:
        """(n, T_o, 3, H, W) frames -> (n, F) features."""
        size = self.config.image_size
        expected = (self.config.obs_horizon, CHANNELS, size, size)
        if frames.ndim != 5 or frames.shape[1:] != expected:
            raise DimensionError(f"expected frames of shape (n, {', '.join(map(str, expected))}), got {frames.shape}")
        n = frames.shape[0]
        return self.encoder(reshape(frames, (n, expected[0] * CHANNELS, size, size)))

    def encode_observation(self, obs: Observation) -> Tensor:
        frames = Tensor(obs.frames[None])
        return reshape(self.encode(frames), (self.encoder.out_dim,))

    def condition(self, frames: Tensor, agent_state: np.ndarray) -> Tensor:
        """Concatenate image features with normalized agent states, one row per sample."""
        agent_state = np.asarray(agent_state, dtype=np.float64).reshape(-1, STATE_DIM)
        if agent_state.shape[0] != frames.shape[0]:
            raise DimensionError(f"{frames.shape[0]} frame stacks but {agent_state.shape[0]} agent states")
        return concat([self.encode(frames), Tensor(self.state_normalizer.normalize(agent_state))], axis=1)

    def observation_condition(self, obs: Observation, frames: Optional[Tensor] = None) -> Tensor:
        """Condition for a single observation; `frames` overrides obs.frames (e.g. a perturbed leaf)."""
        if frames is None:
            frames = Tensor(obs.frames)
        return self.condition(reshape(frames, (1,) + frames.shape), obs.agent_state[None])

    # ============ Denoising ============

    def predict_noise(self, traj_k: Tensor, k, obs: Observation) -> Tensor:
        """eps_theta(traj_k, k, obs) for one (L_a, D_a) trajectory."""
        if traj_k.shape != self.trajectory_shape:
            raise DimensionError(f"trajectory must be {self.trajectory_shape}, got {traj_k.shape}")
        batched = reshape(traj_k, (1,) + traj_k.shape)
        eps_hat = self.denoiser.predict(batched, k, self.observation_condition(obs))
        return reshape(eps_hat, traj_k.shape)

    def sample_normalized(self, cond: Tensor, rng: Optional[np.random.Generator] = None,
                          noise: Optional[SamplingNoise] = None,
                          scheduler: Optional[SchedulerSpec] = None) -> Tensor:
        """Run the sampling chain for every row of `cond`; stays differentiable w.r.t. cond."""
        shape = (cond.shape[0],) + self.trajectory_shape
        x0 = sample_loop(self.schedule, self.denoiser, cond, shape, scheduler or self.scheduler,
                         rng=rng, noise=noise)
        return clamp(x0, -self.config.action_clip, self.config.action_clip)

    def generate_action(self, obs: Observation, rng: np.random.Generator,
                        scheduler: Optional[SchedulerSpec] = None) -> np.ndarray:
        """Sample one trajectory and return it in environment action units, shape (L_a, D_a)."""
        with no_grad():
            normalized = self.sample_normalized(self.observation_condition(obs), rng=rng, scheduler=scheduler)
        return self.action_normalizer.denormalize(normalized.data[0])


# ============ Checkpoints ============

def save_policy(policy: DiffusionPolicy, path: Union[str, Path], metadata: Optional[dict[str, Any]] = None) -> Path:
    """
    Weights are stored as f32 for inference; the f64 weights and Adam
    moments go under `resume/` so training can continue bit-exactly.
    """
    tensors: dict[str, np.ndarray] = {}
    params = policy.parameters()
    for name, p in params.items():
        tensors[f"param/{name}"] = p.data.astype(np.float32)
    tensors["norm/action_low"] = policy.action_normalizer.low
    tensors["norm/action_high"] = policy.action_normalizer.high
    tensors["norm/state_low"] = policy.state_normalizer.low
    tensors["norm/state_high"] = policy.state_normalizer.high

    meta = {"kind": "policy", "policy": policy.config.model_dump(mode="json"), **(metadata or {})}
    state = policy.training_state
    if state is not None:
        for i, name in enumerate(params):
            tensors[f"resume/param/{name}"] = params[name].data
            tensors[f"resume/adam_m/{name}"] = state.optimizer.m[i]
            tensors[f"resume/adam_v/{name}"] = state.optimizer.v[i]
        meta["training"] = {
            "epochs_completed": state.epochs_completed,
            "adam_step": state.optimizer.step,
            "epoch_losses": state.epoch_losses,
        }
    path = CheckpointContainer(tensors, meta).save(path)
    logger.info(f"Saved policy checkpoint to {path}")
    return path


def load_policy(path: Union[str, Path], resume: bool = False) -> DiffusionPolicy:
    """
    Load a policy checkpoint.

    With `resume=True` the exact f64 training state is restored and
    attached as `policy.training_state`.

    Raises:
        CheckpointError: If the file is not a policy checkpoint or tensors are missing
    """
    container = CheckpointContainer.load(path)
    meta = container.metadata
    if meta.get("kind") != "policy":
        raise CheckpointError(f"{path} is not a policy checkpoint (kind={meta.get('kind')!r})")

    config = PolicyConfig.model_validate(meta["policy"])
    tensors = container.tensors
    try:
        policy = DiffusionPolicy.initialize(
            config,
            np.random.default_rng(0),
            MinMaxNormalizer(tensors["norm/action_low"], tensors["norm/action_high"]),
            MinMaxNormalizer(tensors["norm/state_low"], tensors["norm/state_high"]),
        )
        prefix = "resume/param/" if resume else "param/"
        if resume and "training" not in meta:
            raise CheckpointError(f"{path} carries no training state to resume from")
        params = policy.parameters()
        for name, p in params.items():
            stored = tensors[prefix + name]
            if stored.shape != p.shape:
                raise CheckpointError(f"parameter '{name}' has shape {stored.shape}, expected {p.shape}")
            p.data = stored.astype(np.float64)
            p.zero_grad()
        if resume:
            training = meta["training"]
            policy.training_state = TrainingState(
                AdamState(
                    m=[tensors[f"resume/adam_m/{name}"].astype(np.float64) for name in params],
                    v=[tensors[f"resume/adam_v/{name}"].astype(np.float64) for name in params],
                    step=int(training["adam_step"]),
                ),
                epochs_completed=int(training["epochs_completed"]),
                epoch_losses=list(training["epoch_losses"]),
            )
    except KeyError as e:
        raise CheckpointError(f"{path} is missing tensor {e}")
    return policy
