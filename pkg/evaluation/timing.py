"""
Wall-time comparison of the noise-prediction attack against end-to-end attacks.
"""
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from attacks import attack_online_global, end2end_attack
from diffusion import SchedulerSpec
from model import AttackConfig, AttackMode, RunStamp, TimingRow, TimingTable
from policy import DiffusionPolicy, Observation
from utils import SeedStreams

logger = logging.getLogger(__name__)

TIMING_METHODS = ("noise-prediction", "end2end-ddpm", "end2end-ddim8")


@dataclass
class TimingStats:
    """Wall times of repeated runs of one attack method."""
    method: str
    mode: AttackMode
    durations_s: list[float] = field(default_factory=list)

    def add(self, seconds: float) -> None:
        self.durations_s.append(seconds)

    def percentile(self, p: float) -> Optional[float]:
        """Linearly interpolated percentile, None without samples."""
        if not self.durations_s:
            return None
        return float(np.percentile(self.durations_s, p, method="linear"))

    def row(self) -> TimingRow:
        return TimingRow(method=self.method, mode=self.mode, repetitions=len(self.durations_s),
                         median_s=self.percentile(50) or 0.0, p95_s=self.percentile(95) or 0.0)


def cpu_model() -> str:
    try:
        for line in Path("/proc/cpuinfo").read_text().splitlines():
            if line.startswith("model name"):
                return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine() or "unknown"


def _run_method(method: str, policy: DiffusionPolicy, obs: Observation, cfg: AttackConfig,
                rng: np.random.Generator) -> None:
    if method == "noise-prediction":
        attack_online_global(policy, obs, cfg, rng)
    elif method == "end2end-ddpm":
        end2end_attack(policy, obs, cfg, rng, SchedulerSpec.parse("ddpm"))
    elif method == "end2end-ddim8":
        end2end_attack(policy, obs, cfg, rng, SchedulerSpec.parse("ddim8"))
    else:
        raise ValueError(f"Unknown timing method '{method}'")


def timing_comparison(policy: DiffusionPolicy, observations: Sequence[Observation], cfg: Optional[AttackConfig] = None,
                      repetitions: int = 20, modes: Sequence[AttackMode] = tuple(AttackMode),
                      methods: Sequence[str] = TIMING_METHODS, master_seed: int = 0, threads: int = 1,
                      stamp: Optional[RunStamp] = None) -> TimingTable:
    """
    Median and p95 wall time per complete attack (all PGD steps) for each method and mode.

    Repetition r attacks observations[r % len(observations)], so every
    method sees the same inputs.
    """
    if not observations:
        raise ValueError("timing_comparison needs at least one observation")
    cfg = cfg or AttackConfig()
    streams = SeedStreams(master_seed)
    rows = []
    for mode in modes:
        mode_cfg = cfg.model_copy(update={"mode": AttackMode(mode)})
        for m, method in enumerate(methods):
            stats = TimingStats(method, AttackMode(mode))
            for r in range(repetitions):
                rng = streams.generator("attack", m, r)
                start = time.perf_counter()
                _run_method(method, policy, observations[r % len(observations)], mode_cfg, rng)
                stats.add(time.perf_counter() - start)
            row = stats.row()
            logger.info(f"timing {method} ({row.mode.value}): median={row.median_s:.3f}s p95={row.p95_s:.3f}s")
            rows.append(row)
    return TimingTable(rows=rows, cpu=cpu_model(), threads=threads, stamp=stamp)
