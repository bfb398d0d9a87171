"""
Patch attack: PGD on a small image pasted into training frames under random affine transforms.

Coordinates are centred. An image pixel (i, j) sits at (j - W/2, i - H/2)
and a patch pixel (r, c) at (c - (w-1)/2, r - (h-1)/2), one unit per pixel.
"""
import logging
import math
from dataclasses import dataclass
from functools import reduce
from typing import Optional

import numpy as np
import scipy.sparse
from tqdm import tqdm

from attacks.artifacts import PatchArtifact, check_pixels
from attacks.global_attacks import batch_reference, dataset_minibatches
from attacks.losses import noise_prediction_loss
from core import DimensionError, Tensor, add, backward, expand, no_grad, reshape, scale, spmm
from envs import DemoDataset
from model import AttackConfig, AttackMode
from policy import DiffusionPolicy, build_batch, sliding_windows
from utils import patch_sampling_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AffineTransform:
    """Shifts are fractions of the image extent; angles are radians."""
    shift_x: float = 0.0
    shift_y: float = 0.0
    rotation: float = 0.0
    scale: float = 1.0
    shear_x: float = 0.0
    shear_y: float = 0.0

    @property
    def matrix(self) -> np.ndarray:
        """rotation @ shear_x @ shear_y @ scale; the shears have unit determinant."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        rot = np.array([[c, -s], [s, c]])
        shx = np.array([[1.0, math.tan(self.shear_x)], [0.0, 1.0]])
        shy = np.array([[1.0, 0.0], [math.tan(self.shear_y), 1.0]])
        return reduce(np.matmul, [rot, shx, shy, np.eye(2) * self.scale])

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))

    def sampling_matrix(self, image_size: int, patch_h: int, patch_w: int) -> tuple[scipy.sparse.csr_matrix, np.ndarray]:
        """Bilinear weights mapping the patch onto an image_size x image_size frame, plus the covered mask."""
        idx = np.arange(image_size) - image_size / 2.0
        xs, ys = np.meshgrid(idx, idx)
        points = np.stack([xs.ravel(), ys.ravel()], axis=1)
        points = points - np.array([self.shift_x, self.shift_y]) * image_size
        coords = points @ np.linalg.inv(self.matrix).T
        return patch_sampling_matrix(coords, patch_h, patch_w)


@dataclass(frozen=True)
class AffineTransformFamily:
    """Uniform ranges for shift (image fraction), rotation, scale and shears (degrees)."""
    shift: tuple[float, float] = (-0.4, 0.4)
    rotation_deg: tuple[float, float] = (-45.0, 45.0)
    scale: tuple[float, float] = (1.0, 1.0)
    shear_x_deg: tuple[float, float] = (-50.0, 50.0)
    shear_y_deg: tuple[float, float] = (-50.0, 50.0)

    def sample(self, rng: np.random.Generator) -> AffineTransform:
        return AffineTransform(
            shift_x=float(rng.uniform(*self.shift)),
            shift_y=float(rng.uniform(*self.shift)),
            rotation=math.radians(rng.uniform(*self.rotation_deg)),
            scale=float(rng.uniform(*self.scale)),
            shear_x=math.radians(rng.uniform(*self.shear_x_deg)),
            shear_y=math.radians(rng.uniform(*self.shear_y_deg)),
        )

    def contains(self, t: AffineTransform) -> bool:
        def within(value, bounds):
            return bounds[0] - 1e-9 <= value <= bounds[1] + 1e-9

        return (
            within(t.shift_x, self.shift)
            and within(t.shift_y, self.shift)
            and within(math.degrees(t.rotation), self.rotation_deg)
            and within(t.scale, self.scale)
            and within(math.degrees(t.shear_x), self.shear_x_deg)
            and within(math.degrees(t.shear_y), self.shear_y_deg)
        )


def replace(images: Tensor, patch: Tensor, transform: AffineTransform) -> Tensor:
    """
    Paste transform(patch) over every (3, H, W) image of a batch (n, 3, H, W).

    Covered pixels take the bilinearly sampled patch value; the rest keep
    the image. Differentiable with respect to both images and patch.
    """
    if images.ndim != 4 or images.shape[1] != 3 or images.shape[2] != images.shape[3]:
        raise DimensionError(f"replace expects square (n, 3, H, H) images, got {images.shape}")
    if patch.ndim != 3 or patch.shape[0] != 3:
        raise DimensionError(f"replace expects a (3, h, w) patch, got {patch.shape}")
    n, _, size, _ = images.shape
    _, h, w = patch.shape
    matrix, mask = transform.sampling_matrix(size, h, w)
    per_channel = scipy.sparse.kron(scipy.sparse.identity(3), matrix, format="csr")
    placed = reshape(spmm(per_channel, reshape(patch, (3 * h * w, 1))), (3, size, size))
    keep = scale(images, (~mask).reshape(size, size).astype(np.float64))
    return add(keep, expand(placed, images.shape))


def attack_patch(policy: DiffusionPolicy, dataset: DemoDataset, family: AffineTransformFamily, cfg: AttackConfig,
                 rng: Optional[np.random.Generator] = None, epochs: Optional[int] = None,
                 batch: Optional[int] = None, resolution: Optional[int] = None) -> PatchArtifact:
    """
    Train a (3, p, p) patch with p = cfg.patch_pixels.

    Every minibatch draws one transform and pastes the patch into both
    frames of each observation stack; x <- clip(x - alpha * sign(grad), 0, 1)
    with alpha = cfg.dataset_alpha.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    epochs = cfg.epochs if epochs is None else epochs
    batch = cfg.batch if batch is None else batch
    resolution = resolution or policy.config.image_size
    patch = PatchArtifact.random(rng, cfg.patch_pixels, resolution).image
    epoch_losses: list[list[float]] = [[] for _ in range(epochs)]

    steps = tqdm(dataset_minibatches(dataset, policy, epochs, batch, rng), desc="patch",
                 disable=not logger.isEnabledFor(logging.INFO))
    for epoch, frames, states, actions in steps:
        transform = family.sample(rng)
        leaf = Tensor(patch, requires_grad=True)
        b, t_o = frames.shape[:2]
        flat = Tensor(frames.reshape((b * t_o,) + frames.shape[2:]))
        patched = reshape(replace(flat, leaf, transform), frames.shape)
        cond = policy.condition(patched, states)
        loss = noise_prediction_loss(policy, cond, batch_reference(policy, cfg, actions), cfg.mode, rng,
                                     cfg.draws_per_step, cfg.literal_forward)
        backward(loss)
        patch = np.clip(patch - cfg.dataset_alpha * np.sign(leaf.grad), 0.0, 1.0)
        check_pixels(patch)
        epoch_losses[epoch].append(loss.item())

    means = [float(np.mean(losses)) for losses in epoch_losses if losses]
    for epoch, value in enumerate(means):
        logger.info(f"patch epoch {epoch + 1}/{epochs} mean adversarial loss {value:.5f}")
    return PatchArtifact(patch, cfg.patch_pixels / resolution, {
        "attack": "patch", "mode": AttackMode(cfg.mode).value, "alpha": cfg.dataset_alpha,
        "epochs": epochs, "batch": batch, "epoch_losses": means,
    })


def expected_patch_loss(policy: DiffusionPolicy, patch: np.ndarray, dataset: DemoDataset,
                        family: AffineTransformFamily, cfg: AttackConfig, rng: np.random.Generator,
                        transforms: int = 100, windows: Optional[np.ndarray] = None) -> float:
    """Attack loss of `patch` averaged over fresh transforms and (k, eps) draws; every dataset window unless given."""
    windows = sliding_windows(dataset) if windows is None else np.asarray(windows)
    frames, states, actions = build_batch(dataset, windows, policy.config)
    tau = batch_reference(policy, cfg, policy.action_normalizer.normalize(actions))
    b, t_o = frames.shape[:2]
    flat = Tensor(frames.reshape((b * t_o,) + frames.shape[2:]))
    total = 0.0
    with no_grad():
        for _ in range(transforms):
            patched = reshape(replace(flat, Tensor(patch), family.sample(rng)), frames.shape)
            total += noise_prediction_loss(policy, policy.condition(patched, states), tau, cfg.mode, rng).item()
    return total / transforms
