"""
Seeded batch rollouts of a policy under each attack condition.
"""
import asyncio
import logging
import time
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from tqdm import tqdm

from attacks import (
    Artifact,
    BudgetViolationError,
    GlobalPerturbation,
    PatchArtifact,
    apply,
    attack_online_global,
    end2end_attack,
    random_noise_baseline,
)
from attacks.artifacts import BUDGET_TOLERANCE
from diffusion import SchedulerSpec
from envs import PushEnv, sample_patch_pose
from model import AttackConfig, AttackMode, ConditionKind, EnvConfig, EpisodeRecord, RolloutReport, RunStamp
from policy import AttackHook, DiffusionPolicy, Observation, receding_horizon_execute
from utils import SeedStreams

logger = logging.getLogger(__name__)

ARTIFACT_KINDS = (ConditionKind.OFFLINE, ConditionKind.PATCH)
PER_OBSERVATION_KINDS = (ConditionKind.ONLINE, ConditionKind.E2E_DDPM, ConditionKind.E2E_DDIM)


class BenchmarkError(Exception):
    """Raised when a condition cannot be evaluated, e.g. its artifact is missing."""
    pass


@dataclass(frozen=True)
class Condition:
    """One column of a benchmark table."""
    kind: ConditionKind
    mode: Optional[AttackMode] = None
    artifact: Optional[Artifact] = None

    @property
    def label(self) -> str:
        if self.mode is None:
            return self.kind.value
        return f"{self.mode.value}-{self.kind.value}"


def _split_artifact_key(key: str) -> tuple[Optional[AttackMode], ConditionKind]:
    """'offline' or 'targeted-offline' style keys."""
    for mode in AttackMode:
        prefix = f"{mode.value}-"
        if key.startswith(prefix):
            return mode, ConditionKind(key[len(prefix):])
    return None, ConditionKind(key)


def build_conditions(kinds: Sequence[ConditionKind], modes: Sequence[AttackMode],
                     artifacts: Optional[Mapping[str, Artifact]] = None) -> list[Condition]:
    """
    Expand condition kinds into concrete conditions.

    Per-observation attacks get one condition per mode. Offline and patch
    conditions come from pre-trained artifacts, keyed either by kind
    ("offline") or by mode and kind ("untargeted-offline"); the mode is
    taken from the key or else from the artifact's metadata.

    Raises:
        BenchmarkError: If an offline or patch condition has no artifact
    """
    artifacts = dict(artifacts or {})
    by_kind: dict[ConditionKind, list[tuple[Optional[AttackMode], Artifact]]] = {}
    for key, artifact in artifacts.items():
        try:
            mode, kind = _split_artifact_key(key)
        except ValueError:
            raise BenchmarkError(f"Unknown artifact key '{key}'")
        if kind not in ARTIFACT_KINDS:
            raise BenchmarkError(f"Artifact key '{key}' does not name an offline or patch condition")
        expected = GlobalPerturbation if kind == ConditionKind.OFFLINE else PatchArtifact
        if not isinstance(artifact, expected):
            raise BenchmarkError(f"Artifact '{key}' is a {type(artifact).__name__}, expected {expected.__name__}")
        if mode is None and artifact.metadata.get("mode"):
            mode = AttackMode(artifact.metadata["mode"])
        by_kind.setdefault(kind, []).append((mode, artifact))

    conditions: list[Condition] = []
    for kind in dict.fromkeys(ConditionKind(k) for k in kinds):
        if kind in PER_OBSERVATION_KINDS:
            conditions.extend(Condition(kind, AttackMode(m)) for m in dict.fromkeys(modes))
        elif kind in ARTIFACT_KINDS:
            if kind not in by_kind:
                raise BenchmarkError(f"Condition '{kind.value}' needs a pre-trained artifact (--artifacts {kind.value}=PATH)")
            conditions.extend(Condition(kind, mode, artifact) for mode, artifact in by_kind[kind])
        else:
            conditions.append(Condition(kind))

    labels = [c.label for c in conditions]
    duplicates = {label for label in labels if labels.count(label) > 1}
    if duplicates:
        raise BenchmarkError(f"Duplicate benchmark conditions: {sorted(duplicates)}")
    return conditions


class _AttackMeter:
    """Wraps an attack function into a rollout hook that times and audits every call."""

    def __init__(self, attack, sigma: float):
        self.attack = attack
        self.sigma = sigma
        self.calls = 0
        self.seconds = 0.0
        self.violations = 0

    def __call__(self, obs: Observation) -> Observation:
        start = time.perf_counter()
        attacked = self.attack(obs)
        self.seconds += time.perf_counter() - start
        self.calls += 1
        self._audit(obs, attacked)
        return attacked

    def _audit(self, clean: Observation, attacked: Observation) -> None:
        worst = float(np.max(np.abs(attacked.frames - clean.frames)))
        in_range = attacked.frames.min() >= 0.0 and attacked.frames.max() <= 1.0
        if worst > self.sigma + BUDGET_TOLERANCE or not in_range:
            self.violations += 1
            logger.warning(f"Attacked frame violates its budget: |delta|_inf={worst:.6g}, sigma={self.sigma}")

    @property
    def mean_ms(self) -> float:
        return 1000.0 * self.seconds / self.calls if self.calls else 0.0


def _e2e_scheduler(kind: ConditionKind, cfg: AttackConfig) -> SchedulerSpec:
    if kind == ConditionKind.E2E_DDPM:
        return SchedulerSpec.parse("ddpm")
    spec = SchedulerSpec.parse(cfg.scheduler)
    return spec if spec.kind == "ddim" else SchedulerSpec("ddim", 8)


def _attack_hook(policy: DiffusionPolicy, condition: Condition, cfg: AttackConfig,
                 rng: np.random.Generator) -> Optional[_AttackMeter]:
    kind = condition.kind
    if kind == ConditionKind.RANDOM_NOISE:
        return _AttackMeter(lambda obs: apply(obs, random_noise_baseline(obs.frames.shape, cfg.sigma, rng)), cfg.sigma)
    if kind == ConditionKind.OFFLINE:
        artifact = condition.artifact
        return _AttackMeter(lambda obs: apply(obs, artifact), artifact.sigma)
    if kind == ConditionKind.ONLINE:
        mode_cfg = cfg.model_copy(update={"mode": condition.mode})
        return _AttackMeter(lambda obs: apply(obs, attack_online_global(policy, obs, mode_cfg, rng)), cfg.sigma)
    if kind in (ConditionKind.E2E_DDPM, ConditionKind.E2E_DDIM):
        mode_cfg = cfg.model_copy(update={"mode": condition.mode})
        scheduler = _e2e_scheduler(kind, cfg)
        return _AttackMeter(lambda obs: apply(obs, end2end_attack(policy, obs, mode_cfg, rng, scheduler)), cfg.sigma)
    return None


def _scene_patch(condition: Condition, cfg: AttackConfig, streams: SeedStreams, index: int, resolution: int):
    if condition.kind == ConditionKind.PATCH:
        artifact = condition.artifact
    elif condition.kind == ConditionKind.RANDOM_PATCH:
        # One baseline patch image per benchmark, shared by every episode.
        artifact = PatchArtifact.random(streams.generator("attack", 0, 1), cfg.patch_pixels, resolution,
                                        attack="random-patch")
    else:
        return None
    position, angle = sample_patch_pose(streams.generator("eval", index, 1), artifact.size)
    return artifact.place(position, angle)


def run_episode(policy: DiffusionPolicy, condition: Condition, index: int, streams: SeedStreams,
                env_cfg: EnvConfig, attack_cfg: AttackConfig,
                scheduler: Optional[SchedulerSpec] = None) -> EpisodeRecord:
    """
    One seeded rollout. Episode `index` starts from the same initial state and
    uses the same policy noise under every condition.
    """
    env_seed = streams.seed("env", index)
    patch = _scene_patch(condition, attack_cfg, streams, index, env_cfg.resolution)
    env = PushEnv(env_seed, env_cfg.resolution, patch=patch)
    meter = _attack_hook(policy, condition, attack_cfg, streams.generator("attack", index))
    hook: Optional[AttackHook] = meter

    trace = receding_horizon_execute(policy, env, env_cfg.episode_len, hook, rng=streams.generator("eval", index),
                                     scheduler=scheduler, success_threshold=env_cfg.success_threshold)
    record = EpisodeRecord(
        seed=env_seed,
        score=trace.score,
        success=trace.success,
        steps=trace.steps,
        attack_calls=meter.calls if meter else 0,
        attack_ms=meter.mean_ms if meter else 0.0,
        budget_violations=meter.violations if meter else 0,
    )
    logger.debug(f"[{condition.label}] episode {index} score={record.score:.3f} success={record.success}")
    return record


def first_observations(policy: DiffusionPolicy, condition: Condition, index: int, streams: SeedStreams,
                       env_cfg: EnvConfig, attack_cfg: AttackConfig) -> tuple[Observation, Observation]:
    """Clean and attacked versions of episode `index`'s first observation."""
    env_seed = streams.seed("env", index)
    clean_env = PushEnv(env_seed, env_cfg.resolution)
    history = np.stack([clean_env.observe()] * policy.config.obs_horizon)
    clean = Observation(history, clean_env.state.agent_state)

    patch = _scene_patch(condition, attack_cfg, streams, index, env_cfg.resolution)
    if patch is not None:
        scene = PushEnv(env_seed, env_cfg.resolution, patch=patch)
        return clean, clean.with_frames(np.stack([scene.observe()] * policy.config.obs_horizon))
    meter = _attack_hook(policy, condition, attack_cfg, streams.generator("attack", index))
    return clean, (meter(clean) if meter else clean)


async def run_condition(policy: DiffusionPolicy, condition: Condition, n_episodes: int, streams: SeedStreams,
                        env_cfg: EnvConfig, attack_cfg: AttackConfig, threads: int = 1,
                        stamp: Optional[RunStamp] = None,
                        scheduler: Optional[SchedulerSpec] = None) -> RolloutReport:
    """Episodes run concurrently on at most `threads` workers; records stay in episode order."""
    semaphore = asyncio.Semaphore(threads)
    progress = tqdm(total=n_episodes, desc=condition.label, disable=not logger.isEnabledFor(logging.INFO))

    async def bounded_episode(index: int) -> EpisodeRecord:
        async with semaphore:
            record = await asyncio.to_thread(run_episode, policy, condition, index, streams,
                                             env_cfg, attack_cfg, scheduler)
            progress.update(1)
            return record

    try:
        episodes = await asyncio.gather(*[bounded_episode(i) for i in range(n_episodes)])
    finally:
        progress.close()

    report = RolloutReport.from_episodes(condition.label, list(episodes), stamp)
    if report.budget_violations:
        logger.warning(f"[{condition.label}] {report.budget_violations} attacked observations violated the budget")
    logger.info(f"[{condition.label}] n={n_episodes} success_rate={report.success_rate:.3f} "
                f"mean_score={report.mean_score:.3f} mean_attack_ms={report.mean_attack_ms:.1f}")
    return report


async def run_benchmark(policy: DiffusionPolicy, env_cfg: EnvConfig, conditions: Sequence[Condition],
                        n_episodes: int = 50, master_seed: int = 0, attack_cfg: Optional[AttackConfig] = None,
                        threads: int = 1, stamp: Optional[RunStamp] = None,
                        scheduler: Optional[SchedulerSpec] = None) -> list[RolloutReport]:
    """
    Evaluate every condition on the same `n_episodes` seeded episodes.

    Conditions run one after another; episodes within a condition share the
    thread pool.
    """
    if n_episodes < 0:
        raise BenchmarkError("n_episodes must be nonnegative")
    attack_cfg = attack_cfg or AttackConfig()
    streams = SeedStreams(master_seed)
    reports = []
    for condition in conditions:
        try:
            reports.append(await run_condition(policy, condition, n_episodes, streams, env_cfg, attack_cfg,
                                               threads, stamp, scheduler))
        except BudgetViolationError as e:
            raise BenchmarkError(f"[{condition.label}] attack left its budget: {e}")
    return reports
