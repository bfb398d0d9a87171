"""
attack: craft an adversarial artifact.
"""
import argparse
import asyncio
import logging
from pathlib import Path

import numpy as np

from attacks import (
    AffineTransformFamily,
    attack_offline_global,
    attack_online_global,
    attack_patch,
    end2end_attack,
    export_patch_ppm,
    random_noise_baseline,
    save_artifact,
)
from commands.common import add_mode_flags, load_matching_policy, stamp_metadata
from diffusion import SchedulerSpec
from envs import DemoDataset
from evaluation import Condition, emit_reports, run_benchmark
from model import AttackMode, ConditionKind, RunConfig
from policy import Observation, build_batch, sliding_windows
from utils import ConfigError, SeedStreams, run_stamp

logger = logging.getLogger(__name__)

NAME = "attack"
KINDS = ("online", "offline", "patch", "e2e", "random")
DATASET_KINDS = ("offline", "patch")


def register(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(NAME, help="Craft an attack artifact")
    parser.add_argument("kind", choices=KINDS, help="Attack to run")
    parser.add_argument("--ckpt", type=str, help="Policy checkpoint (default: runs/policy.dpab)")
    parser.add_argument("--data", type=str, help="Dataset for offline and patch training (default: runs/demos.dpab)")
    parser.add_argument("--sigma", type=float, help="L-inf budget (default: 0.03)")
    parser.add_argument("--alpha", type=float,
                        help="PGD step size (default: 0.001875 per observation, 0.0001 for offline and patch)")
    parser.add_argument("--steps", type=int, help="PGD iterations per observation (default: 50)")
    parser.add_argument("--epochs", type=int, help="Dataset passes for offline and patch attacks (default: 10)")
    parser.add_argument("--batch", type=int, help="Minibatch size for offline and patch attacks (default: 64)")
    parser.add_argument("--scheduler", type=str, help="Sampling chain of the e2e attack, ddpm or ddim<n> (default: ddim8)")
    parser.add_argument("--draws-per-step", type=int, help="Monte-Carlo (k, eps) draws per PGD step (default: 1)")
    parser.add_argument("--obs-source", type=str,
                        help="Dataset whose observation the online/e2e attack perturbs; "
                             "without it the attack runs inside a benchmark instead")
    parser.add_argument("--obs-index", type=int, default=0, help="Window index into --obs-source (default: 0)")
    parser.add_argument("--out", type=str, help="Artifact file (default: runs/artifacts/<kind>.dpab)")
    add_mode_flags(parser)
    return parser


def overrides(args: argparse.Namespace) -> dict:
    alpha_key = "attack.dataset_alpha" if args.kind in DATASET_KINDS else "attack.alpha"
    return {
        "paths.checkpoint": args.ckpt,
        "paths.data": args.data,
        "attack.sigma": args.sigma,
        alpha_key: args.alpha,
        "attack.steps": args.steps,
        "attack.epochs": args.epochs,
        "attack.batch": args.batch,
        "attack.scheduler": args.scheduler,
        "attack.draws_per_step": args.draws_per_step,
        "attack.mode": args.mode,
    }


def _validate(args: argparse.Namespace) -> None:
    if args.obs_source and args.kind not in ("online", "e2e"):
        raise ConfigError(f"--obs-source only applies to online and e2e attacks, not '{args.kind}'")
    if args.scheduler and args.kind != "e2e":
        raise ConfigError("--scheduler only applies to the e2e attack")
    if args.mode and args.kind == "random":
        raise ConfigError("the random baseline has no attack mode")
    if (args.epochs is not None or args.batch is not None) and args.kind not in DATASET_KINDS:
        raise ConfigError("--epochs and --batch only apply to offline and patch attacks")


def _source_observation(path: str, index: int, config) -> Observation:
    dataset = DemoDataset.load(path)
    windows = sliding_windows(dataset)
    if not 0 <= index < len(windows):
        raise ConfigError(f"--obs-index {index} out of range for {len(windows)} windows")
    frames, states, _ = build_batch(dataset, windows[index:index + 1], config)
    return Observation(frames[0], states[0])


def _artifact_path(args: argparse.Namespace, config: RunConfig, label: str) -> Path:
    return Path(args.out) if args.out else Path(config.paths.artifacts_dir) / f"{label}.dpab"


async def _benchmark_instead(policy, kind: ConditionKind, config: RunConfig) -> dict:
    """Per-observation attacks without a fixed observation are evaluated in closed loop."""
    logger.info(f"No --obs-source given; running the {kind.value} attack inside a benchmark")
    condition = Condition(kind, AttackMode(config.attack.mode))
    stamp = run_stamp(config)
    reports = await run_benchmark(policy, config.env, [condition], config.eval.episodes, config.seed,
                                  config.attack, config.eval.threads, stamp)
    paths = emit_reports(reports, config.paths.report_dir, name=f"attack_{condition.label}", stamp=stamp)
    return {"reports": [str(p) for p in paths], "success_rate": reports[0].success_rate}


async def run(args: argparse.Namespace, config: RunConfig) -> dict:
    _validate(args)
    cfg = config.attack
    streams = SeedStreams(config.seed)
    rng = streams.generator("attack")
    metadata = stamp_metadata(config)

    if args.kind == "random":
        shape = (config.policy.obs_horizon, 3, config.env.resolution, config.env.resolution)
        artifact = random_noise_baseline(shape, cfg.sigma, rng)
        path = save_artifact(artifact, _artifact_path(args, config, "random"), metadata)
        return {"artifact": str(path)}

    policy = load_matching_policy(config)

    if args.kind in ("online", "e2e"):
        scheduler = SchedulerSpec.parse(cfg.scheduler)
        if not args.obs_source:
            kind = ConditionKind.ONLINE if args.kind == "online" else (
                ConditionKind.E2E_DDPM if scheduler.kind == "ddpm" else ConditionKind.E2E_DDIM)
            return await _benchmark_instead(policy, kind, config)
        obs = _source_observation(args.obs_source, args.obs_index, policy.config)
        if args.kind == "online":
            artifact = await asyncio.to_thread(attack_online_global, policy, obs, cfg, rng)
        else:
            artifact = await asyncio.to_thread(end2end_attack, policy, obs, cfg, rng, scheduler)
        label = f"{cfg.mode.value}-{args.kind}"
        path = save_artifact(artifact, _artifact_path(args, config, label), metadata)
        return {"artifact": str(path), "linf": float(np.max(np.abs(artifact.delta)))}

    dataset = DemoDataset.load(config.paths.data)
    label = f"{cfg.mode.value}-{args.kind}"
    if args.kind == "offline":
        artifact = await asyncio.to_thread(attack_offline_global, policy, dataset, cfg, rng)
        path = save_artifact(artifact, _artifact_path(args, config, label), metadata)
        return {"artifact": str(path), "epoch_losses": artifact.metadata["epoch_losses"]}

    artifact = await asyncio.to_thread(attack_patch, policy, dataset, AffineTransformFamily(), cfg, rng,
                                       None, None, config.env.resolution)
    path = save_artifact(artifact, _artifact_path(args, config, label), metadata)
    image = export_patch_ppm(artifact, path.with_suffix(".ppm"))
    logger.info(f"Exported patch image to {image}")
    return {"artifact": str(path), "image": str(image), "epoch_losses": artifact.metadata["epoch_losses"]}
