"""
Top-down rasterizer for the push scene, with optional in-scene patches.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from envs.push import AGENT_RADIUS, BLOCK_SIDE, GOAL_CENTER, GOAL_SIDE, EnvState, rotation
from utils import patch_sampling_matrix

TABLE_COLOR = np.array([0.92, 0.91, 0.87])
GOAL_COLOR = np.array([0.55, 0.82, 0.55])
BLOCK_COLOR = np.array([0.45, 0.46, 0.52])
AGENT_COLOR = np.array([0.25, 0.35, 0.85])
SUPERSAMPLE = 2
PATCH_ROTATION = math.radians(45.0)


@dataclass(frozen=True, eq=False)
class ScenePatch:
    """A printed patch lying on the table: image, pose and physical side length."""
    image: np.ndarray
    position: np.ndarray
    angle: float
    size: float

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float64)
        if image.ndim != 3 or image.shape[0] != 3:
            raise ValueError(f"patch image must be (3, h, w), got {image.shape}")
        if image.min() < 0.0 or image.max() > 1.0:
            raise ValueError("patch pixels must lie in [0, 1]")
        position = np.asarray(self.position, dtype=np.float64)
        if not placement_allowed(position, self.size):
            raise ValueError(f"patch position {position.tolist()} is outside the placement region")
        if abs(self.angle) > PATCH_ROTATION + 1e-12:
            raise ValueError(f"patch rotation {math.degrees(self.angle):.1f} deg outside [-45, 45]")
        object.__setattr__(self, "image", image)
        object.__setattr__(self, "position", position)


def placement_allowed(position: np.ndarray, size: float) -> bool:
    """On the table and not overlapping the goal square."""
    half = size / 2.0
    on_table = bool(np.all(position >= half) and np.all(position <= 1.0 - half))
    clear_of_goal = bool(np.any(np.abs(position - GOAL_CENTER) >= GOAL_SIDE / 2.0 + half))
    return on_table and clear_of_goal


def sample_patch_pose(rng: np.random.Generator, size: float) -> tuple[np.ndarray, float]:
    """Uniform position over the placement region and rotation in [-45, 45] degrees."""
    half = size / 2.0
    while True:
        position = rng.uniform(half, 1.0 - half, size=2)
        if placement_allowed(position, size):
            break
    return position, float(rng.uniform(-PATCH_ROTATION, PATCH_ROTATION))


@lru_cache(maxsize=8)
def _pixel_centers(resolution: int) -> np.ndarray:
    """World coordinates of pixel centres, shape (resolution, resolution, 2) as (x, y)."""
    c = (np.arange(resolution) + 0.5) / resolution
    xs, ys = np.meshgrid(c, c)
    return np.stack([xs, ys], axis=-1)


def _coverage_masks(state: EnvState, resolution: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Anti-aliased goal, block and agent coverage fractions per output pixel."""
    fine = resolution * SUPERSAMPLE
    p = _pixel_centers(fine)
    goal = np.all(np.abs(p - GOAL_CENTER) <= GOAL_SIDE / 2.0, axis=-1)
    local = (p - state.block_pos) @ rotation(state.block_angle)
    block = np.all(np.abs(local) <= BLOCK_SIDE / 2.0, axis=-1)
    agent = np.linalg.norm(p - state.agent_pos, axis=-1) <= AGENT_RADIUS

    def pool(mask):
        return mask.reshape(resolution, SUPERSAMPLE, resolution, SUPERSAMPLE).mean(axis=(1, 3))

    return pool(goal), pool(block), pool(agent)


def _composite_patch(image: np.ndarray, patch: ScenePatch) -> np.ndarray:
    resolution = image.shape[-1]
    _, h, w = patch.image.shape
    offsets = _pixel_centers(resolution).reshape(-1, 2) - patch.position
    coords = offsets @ rotation(patch.angle) * (w / patch.size)
    matrix, mask = patch_sampling_matrix(coords, h, w)
    sampled = matrix @ patch.image.reshape(3, -1).T
    flat = image.reshape(3, -1).copy()
    flat[:, mask] = sampled[mask].T
    return flat.reshape(image.shape)


def quantize_frame(image: np.ndarray) -> np.ndarray:
    """[0, 1] float image to the u8 levels a camera records."""
    return np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)


def render(state: EnvState, patch: Optional[ScenePatch] = None, resolution: int = 64) -> np.ndarray:
    """
    Rasterize the scene to a (3, resolution, resolution) image in [0, 1].

    Layers, bottom to top: table, goal, patch, block, agent. The patch is
    pixels only and never touches the physics.
    """
    goal, block, agent = _coverage_masks(state, resolution)
    image = TABLE_COLOR[:, None, None] * (1.0 - goal) + GOAL_COLOR[:, None, None] * goal
    if patch is not None:
        image = _composite_patch(image, patch)
    image = image * (1.0 - block) + BLOCK_COLOR[:, None, None] * block
    image = image * (1.0 - agent) + AGENT_COLOR[:, None, None] * agent
    return np.clip(image, 0.0, 1.0)
