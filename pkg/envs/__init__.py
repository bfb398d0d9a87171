from envs.push import (
    AGENT_RADIUS,
    BLOCK_SIDE,
    GOAL_CENTER,
    GOAL_SIDE,
    MAX_SPEED,
    SUCCESS_THRESHOLD,
    EnvState,
    PushEnv,
    coverage,
    reset,
    score_episode,
    state_coverage,
    step,
)
from envs.render import ScenePatch, placement_allowed, quantize_frame, render, sample_patch_pose
from envs.expert import SLEW_LIMIT, scripted_expert
from envs.dataset import DatasetGenerationError, DemoDataset, Episode, generate_dataset

__all__ = [
    "AGENT_RADIUS",
    "BLOCK_SIDE",
    "GOAL_CENTER",
    "GOAL_SIDE",
    "MAX_SPEED",
    "SUCCESS_THRESHOLD",
    "EnvState",
    "PushEnv",
    "coverage",
    "reset",
    "score_episode",
    "state_coverage",
    "step",
    "ScenePatch",
    "placement_allowed",
    "quantize_frame",
    "render",
    "sample_patch_pose",
    "SLEW_LIMIT",
    "scripted_expert",
    "DatasetGenerationError",
    "DemoDataset",
    "Episode",
    "generate_dataset",
]
