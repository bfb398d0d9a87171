"""
Budget and step-count sweeps for per-observation attacks.
"""
import logging
from typing import Optional, Sequence

from evaluation.benchmark import BenchmarkError, Condition, run_benchmark
from evaluation.stats import paired_sign_test
from model import AblationRow, AblationTable, AttackConfig, AttackMode, ConditionKind, EnvConfig, RunStamp
from policy import DiffusionPolicy

logger = logging.getLogger(__name__)

DEFAULT_SIGMAS = (0.01, 0.03, 0.05)
DEFAULT_STEPS = (10, 20, 50)
FIXED_STEPS = 50
FIXED_SIGMA = 0.03


def step_size(sigma: float, steps: int) -> float:
    """alpha = 2 * sigma / N, so N steps can cross the budget box twice."""
    return 2.0 * sigma / steps if steps else 0.0


def sweep_settings(axis: str, values: Optional[Sequence[float]] = None) -> list[tuple[float, int]]:
    """(sigma, steps) pairs for a sweep along `axis` with the other parameter held fixed."""
    if axis == "sigma":
        return [(float(s), FIXED_STEPS) for s in (values or DEFAULT_SIGMAS)]
    if axis == "steps":
        return [(FIXED_SIGMA, int(n)) for n in (values or DEFAULT_STEPS)]
    raise BenchmarkError(f"Unknown ablation axis '{axis}'; expected 'sigma' or 'steps'")


async def ablation_sweep(policy: DiffusionPolicy, env_cfg: EnvConfig, axis: str,
                         values: Optional[Sequence[float]] = None, n_episodes: int = 50, master_seed: int = 0,
                         attack_cfg: Optional[AttackConfig] = None, kind: ConditionKind = ConditionKind.ONLINE,
                         mode: AttackMode = AttackMode.TARGETED, threads: int = 1,
                         stamp: Optional[RunStamp] = None) -> AblationTable:
    """
    Run one benchmark condition per setting and tabulate success rate against the parameter.

    Each row also carries the one-sided paired sign-test p-value for a drop
    relative to the previous row; all rows share episode seeds.
    """
    base = attack_cfg or AttackConfig()
    condition = Condition(kind, mode)
    rows: list[AblationRow] = []
    previous = None
    for sigma, steps in sweep_settings(axis, values):
        alpha = step_size(sigma, steps)
        cfg = base.model_copy(update={"sigma": sigma, "steps": steps, "alpha": alpha or base.alpha})
        [report] = await run_benchmark(policy, env_cfg, [condition], n_episodes, master_seed, cfg, threads, stamp)
        successes = [e.success for e in report.episodes]
        p_value = paired_sign_test(previous, successes) if previous is not None else None
        rows.append(AblationRow(sigma=sigma, steps=steps, alpha=cfg.alpha, success_rate=report.success_rate,
                                mean_score=report.mean_score, sign_test_p=p_value))
        logger.info(f"ablation {axis}: sigma={sigma} steps={steps} alpha={cfg.alpha:.6f} "
                    f"success_rate={report.success_rate:.3f}")
        previous = successes
    return AblationTable(axis=axis, condition=condition.label, rows=rows, stamp=stamp)
