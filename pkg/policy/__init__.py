from policy.networks import ConditionalDenoiser, VisionEncoder, sinusoidal_embedding
from policy.normalizer import MinMaxNormalizer
from policy.diffusion_policy import (
    DiffusionPolicy,
    Observation,
    TrainingState,
    load_policy,
    save_policy,
)
from policy.training import (
    TrainingError,
    build_batch,
    evaluate_denoising_loss,
    sliding_windows,
    train_policy,
)
from policy.rollout import AttackHook, RolloutTrace, receding_horizon_execute

__all__ = [
    "ConditionalDenoiser",
    "VisionEncoder",
    "sinusoidal_embedding",
    "MinMaxNormalizer",
    "DiffusionPolicy",
    "Observation",
    "TrainingState",
    "load_policy",
    "save_policy",
    "TrainingError",
    "build_batch",
    "evaluate_denoising_loss",
    "sliding_windows",
    "train_policy",
    "AttackHook",
    "RolloutTrace",
    "receding_horizon_execute",
]
