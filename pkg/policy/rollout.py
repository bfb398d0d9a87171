"""
Receding-horizon execution of a diffusion policy in the push environment.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from diffusion import SchedulerSpec
from envs import EnvState, PushEnv, score_episode
from policy.diffusion_policy import DiffusionPolicy, Observation

logger = logging.getLogger(__name__)

AttackHook = Callable[[Observation], Observation]


@dataclass
class RolloutTrace:
    states: list[EnvState] = field(default_factory=list)
    observations: list[Observation] = field(default_factory=list)
    actions: list[np.ndarray] = field(default_factory=list)
    coverages: list[float] = field(default_factory=list)
    score: float = 0.0
    success: bool = False

    @property
    def steps(self) -> int:
        return len(self.actions)


def receding_horizon_execute(
    policy: DiffusionPolicy,
    env: PushEnv,
    episode_len: int,
    attack_hook: Optional[AttackHook] = None,
    rng: Optional[np.random.Generator] = None,
    scheduler: Optional[SchedulerSpec] = None,
    success_threshold: float = 0.9,
) -> RolloutTrace:
    """
    Observe, plan L_a actions, execute the first `execute_steps`, repeat.

    `attack_hook` sees every observation before the policy does and
    returns the (possibly perturbed) observation the policy acts on.
    Patches are part of the env render, not of the hook.
    """
    rng = rng if rng is not None else np.random.default_rng(env.seed)
    first = env.observe()
    history = deque([first] * policy.config.obs_horizon, maxlen=policy.config.obs_horizon)
    trace = RolloutTrace(states=[env.state], coverages=list(env.coverages))

    while trace.steps < episode_len:
        obs = Observation(np.stack(history), env.state.agent_state)
        if attack_hook is not None:
            obs = attack_hook(obs)
        trace.observations.append(obs)
        plan = policy.generate_action(obs, rng, scheduler)
        for action in plan[:min(policy.config.execute_steps, episode_len - trace.steps)]:
            coverage = env.step(action)
            trace.actions.append(action)
            trace.states.append(env.state)
            trace.coverages.append(coverage)
            history.append(env.observe())

    trace.score, trace.success = score_episode(trace.coverages, success_threshold)
    logger.debug(f"rollout seed={env.seed} steps={trace.steps} score={trace.score:.3f}")
    return trace
