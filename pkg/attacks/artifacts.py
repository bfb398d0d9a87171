"""
Attack artifacts: global L-inf perturbations and printable patches.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from core import DimensionError
from envs import ScenePatch
from policy import Observation
from utils import CheckpointContainer, CheckpointError, save_ppm

logger = logging.getLogger(__name__)

BUDGET_TOLERANCE = 1e-12


class BudgetViolationError(Exception):
    """Raised when a perturbation leaves its sigma box or an image leaves [0, 1]."""
    pass


def check_budget(delta: np.ndarray, sigma: float) -> None:
    worst = float(np.max(np.abs(delta))) if np.size(delta) else 0.0
    if worst > sigma + BUDGET_TOLERANCE:
        raise BudgetViolationError(f"|delta|_inf = {worst:.6g} exceeds budget {sigma:.6g}")


def check_pixels(images: np.ndarray) -> None:
    if np.size(images) and (np.min(images) < 0.0 or np.max(images) > 1.0):
        raise BudgetViolationError("attacked image left the [0, 1] pixel range")


@dataclass(eq=False)
class GlobalPerturbation:
    """
    Additive perturbation applied as clip(I + delta, 0, 1).

    `delta` is either one tensor per observation frame slot, (T_o, 3, H, W),
    or a single (3, H, W) tensor shared by every frame.
    """
    delta: np.ndarray
    sigma: float
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=np.float64)
        if self.delta.ndim not in (3, 4):
            raise DimensionError(f"perturbation must be (3, H, W) or (T_o, 3, H, W), got {self.delta.shape}")
        check_budget(self.delta, self.sigma)

    @classmethod
    def zeros(cls, shape: tuple[int, ...], sigma: float, **metadata) -> "GlobalPerturbation":
        return cls(np.zeros(shape), sigma, dict(metadata))

    @property
    def shared(self) -> bool:
        return self.delta.ndim == 3

    def apply_frames(self, frames: np.ndarray) -> np.ndarray:
        frames = np.asarray(frames, dtype=np.float64)
        expected = frames.shape[1:] if self.shared else frames.shape
        if self.delta.shape != expected:
            raise DimensionError(f"perturbation {self.delta.shape} does not fit frames {frames.shape}")
        return np.clip(frames + self.delta, 0.0, 1.0)


@dataclass(eq=False)
class PatchArtifact:
    """A (3, h, w) patch image in [0, 1] with its side length on the table."""
    image: np.ndarray
    size: float
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        if self.image.ndim != 3 or self.image.shape[0] != 3:
            raise DimensionError(f"patch must be (3, h, w), got {self.image.shape}")
        check_pixels(self.image)

    @classmethod
    def random(cls, rng: np.random.Generator, pixels: int, resolution: int = 64, **metadata) -> "PatchArtifact":
        """clip(N(0, I) + 0.5, 0, 1), the starting point of patch training and the random-patch baseline."""
        image = np.clip(rng.standard_normal((3, pixels, pixels)) + 0.5, 0.0, 1.0)
        return cls(image, pixels / resolution, dict(metadata))

    def place(self, position: np.ndarray, angle: float) -> ScenePatch:
        return ScenePatch(self.image, position, angle, self.size)


Artifact = Union[GlobalPerturbation, PatchArtifact]


def apply(obs: Observation, artifact: GlobalPerturbation) -> Observation:
    """Perturbed copy of an observation; patches are rendered in-scene instead."""
    if not isinstance(artifact, GlobalPerturbation):
        raise TypeError("patch artifacts are placed in the scene, not applied to observations")
    return obs.with_frames(artifact.apply_frames(obs.frames))


def save_artifact(artifact: Artifact, path: Union[str, Path], metadata: Optional[dict[str, Any]] = None) -> Path:
    meta = {**artifact.metadata, **(metadata or {})}
    if isinstance(artifact, GlobalPerturbation):
        container = CheckpointContainer({"delta": artifact.delta.astype(np.float32)}, {**meta, "kind": "global", "sigma": artifact.sigma})
    else:
        container = CheckpointContainer({"patch": artifact.image.astype(np.float32)}, {**meta, "kind": "patch", "size": artifact.size})
    path = container.save(path)
    logger.info(f"Saved {container.metadata['kind']} artifact to {path}")
    return path


def load_artifact(path: Union[str, Path]) -> Artifact:
    """
    Load an artifact saved by `save_artifact`.

    Values are stored as f32 and projected back onto their constraint set,
    so a loaded perturbation always satisfies its budget.
    """
    container = CheckpointContainer.load(path)
    meta = dict(container.metadata)
    kind = meta.pop("kind", None)
    try:
        if kind == "global":
            sigma = float(meta.pop("sigma"))
            delta = np.clip(container.tensors["delta"].astype(np.float64), -sigma, sigma)
            return GlobalPerturbation(delta, sigma, meta)
        if kind == "patch":
            size = float(meta.pop("size"))
            image = np.clip(container.tensors["patch"].astype(np.float64), 0.0, 1.0)
            return PatchArtifact(image, size, meta)
    except KeyError as e:
        raise CheckpointError(f"{path} is missing artifact field {e}")
    raise CheckpointError(f"{path} is not an attack artifact (kind={kind!r})")


def export_patch_ppm(artifact: PatchArtifact, path: Union[str, Path]) -> Path:
    return save_ppm(path, artifact.image)
