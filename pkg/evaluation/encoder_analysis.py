"""
How far random versus adversarial perturbations move the visual feature.
"""
import logging
from typing import Optional, Sequence

import numpy as np
from tqdm import tqdm

from attacks import GlobalPerturbation, attack_online_global, random_noise_baseline
from core import Tensor, no_grad
from envs import DemoDataset
from model import AttackConfig, AttackMode, DistanceSummary, EncoderAnalysisReport, RunStamp
from policy import DiffusionPolicy, Observation, build_batch, sliding_windows
from utils import SeedStreams

logger = logging.getLogger(__name__)


def summarize(distances: Sequence[float]) -> DistanceSummary:
    if len(distances) == 0:
        return DistanceSummary(mean=0.0, q1=0.0, median=0.0, q3=0.0)
    q1, median, q3 = np.percentile(distances, [25, 50, 75])
    return DistanceSummary(mean=float(np.mean(distances)), q1=float(q1), median=float(median), q3=float(q3))


def feature_distance(policy: DiffusionPolicy, frames: np.ndarray, perturbed: np.ndarray) -> float:
    """||E(x) - E(x')||^2 for one (T_o, 3, H, W) observation stack."""
    with no_grad():
        clean = policy.encode(Tensor(frames[None])).data
        moved = policy.encode(Tensor(perturbed[None])).data
    return float(np.sum((clean - moved) ** 2))


def select_windows(dataset: DemoDataset, n_images: int, master_seed: int) -> np.ndarray:
    """A seeded subset of dataset windows, in dataset order."""
    windows = sliding_windows(dataset)
    if n_images >= len(windows):
        return windows
    chosen = SeedStreams(master_seed).generator("eval").choice(len(windows), size=n_images, replace=False)
    return windows[np.sort(chosen)]


def encoder_analysis(policy: DiffusionPolicy, dataset: DemoDataset, n_images: int = 1000, sigma: float = 0.03,
                     cfg: Optional[AttackConfig] = None, artifact: Optional[GlobalPerturbation] = None,
                     master_seed: int = 0, stamp: Optional[RunStamp] = None,
                     windows: Optional[np.ndarray] = None) -> EncoderAnalysisReport:
    """
    Both distances on the same observation stacks.

    The adversarial delta is the given offline `artifact` or, without one,
    a per-observation online attack at budget `sigma` (targeted unless `cfg`
    says otherwise). Random noise is drawn at the same budget. Every random
    draw is keyed by the window, not by its position in the sample, so the
    distances do not depend on ordering. `windows` overrides the seeded
    selection of (episode, step) pairs.
    """
    cfg = (cfg or AttackConfig(mode=AttackMode.TARGETED)).model_copy(update={"sigma": sigma})
    if artifact is not None and artifact.sigma > sigma + 1e-12:
        logger.warning(f"Artifact budget {artifact.sigma} exceeds the analysis budget {sigma}")
    streams = SeedStreams(master_seed)
    windows = select_windows(dataset, n_images, master_seed) if windows is None else np.asarray(windows)
    random_distances, adversarial_distances = [], []

    progress = tqdm(windows, desc="encoder", disable=not logger.isEnabledFor(logging.INFO))
    for e, t in progress:
        frames, states, _ = build_batch(dataset, np.array([[e, t]]), policy.config)
        frames, state = frames[0], states[0]
        noise = random_noise_baseline(frames.shape, sigma, streams.generator("attack", int(e), int(t)))
        if artifact is not None:
            adversarial = artifact
        else:
            adversarial = attack_online_global(policy, Observation(frames, state), cfg,
                                               streams.generator("attack", int(e), int(t), 1))
        random_distances.append(feature_distance(policy, frames, noise.apply_frames(frames)))
        adversarial_distances.append(feature_distance(policy, frames, adversarial.apply_frames(frames)))

    report = EncoderAnalysisReport(
        sample_count=len(windows),
        sigma=sigma,
        random_distances=random_distances,
        adversarial_distances=adversarial_distances,
        random_summary=summarize(random_distances),
        adversarial_summary=summarize(adversarial_distances),
        stamp=stamp,
    )
    logger.info(f"encoder analysis on {report.sample_count} observations: "
                f"mean random distance {report.random_summary.mean:.4g}, "
                f"mean adversarial distance {report.adversarial_summary.mean:.4g}")
    return report
