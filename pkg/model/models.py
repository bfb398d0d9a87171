"""
Pydantic models for configuration documents, reports and run-ledger records.
"""
from datetime import datetime
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class AttackMode(str, Enum):
    TARGETED = "targeted"
    UNTARGETED = "untargeted"


class AttackLoss(str, Enum):
    NOISE_PREDICTION = "noise-prediction"
    END2END = "end2end"


class ConditionKind(str, Enum):
    CLEAN = "clean"
    RANDOM_NOISE = "random-noise"
    ONLINE = "online"
    OFFLINE = "offline"
    PATCH = "patch"
    RANDOM_PATCH = "random-patch"
    E2E_DDPM = "e2e-ddpm"
    E2E_DDIM = "e2e-ddim"


class RunStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ============ Configuration ============

class EnvConfig(StrictModel):
    """Push environment and rollout settings."""
    resolution: int = Field(default=64, ge=16, description="Rendered image side in pixels")
    episode_len: int = Field(default=200, ge=0, description="Env steps per evaluation episode")
    patch_pixels: int = Field(default=13, ge=1, description="Adversarial patch side in pixels")
    success_threshold: float = Field(default=0.9, gt=0, le=1)


class PolicyConfig(StrictModel):
    """Architecture and diffusion hyperparameters of the visual diffusion policy."""
    obs_horizon: int = Field(default=2, ge=1)
    action_horizon: int = Field(default=8, ge=1)
    action_dim: int = Field(default=2, ge=1)
    execute_steps: int = Field(default=4, ge=1)
    image_size: int = Field(default=64, ge=16)
    encoder_channels: list[int] = Field(default_factory=lambda: [8, 16, 32, 64])
    time_embedding_dim: int = Field(default=32, ge=2)
    hidden_width: int = Field(default=256, ge=1)
    diffusion_steps: int = Field(default=100, ge=1)
    beta_start: float = Field(default=1e-4, gt=0, lt=1)
    beta_end: float = Field(default=2e-2, gt=0, lt=1)
    inference_scheduler: str = Field(default="ddim8", description="'ddpm' or 'ddim<n>'")
    action_clip: float = Field(default=1.5, gt=0)

    @model_validator(mode="after")
    def _check_horizons(self):
        if self.execute_steps > self.action_horizon:
            raise ValueError("execute_steps cannot exceed action_horizon")
        return self

    @property
    def feature_dim(self) -> int:
        return self.encoder_channels[-1]


class TrainConfig(StrictModel):
    """Demonstration generation and behavior-cloning settings."""
    episodes: int = Field(default=150, ge=1)
    max_steps: int = Field(default=200, ge=1)
    epochs: int = Field(default=60, ge=0)
    batch: int = Field(default=64, ge=1)
    lr: float = Field(default=1e-3, gt=0)


class AttackConfig(StrictModel):
    """PGD attack parameters shared by every attack type."""
    sigma: float = Field(default=0.03, ge=0, description="L-inf budget in pixel units")
    alpha: float = Field(default=0.001875, gt=0, description="PGD step size")
    dataset_alpha: float = Field(default=0.0001, gt=0, description="PGD step size for offline and patch training")
    steps: int = Field(default=50, ge=0, description="PGD iterations for per-observation attacks")
    mode: AttackMode = AttackMode.TARGETED
    target: Optional[list[list[float]]] = Field(
        default=None, description="Normalized target trajectory; all ones when omitted"
    )
    loss: AttackLoss = AttackLoss.NOISE_PREDICTION
    scheduler: str = Field(default="ddim8", description="Sampling chain used by end-to-end attacks")
    epochs: int = Field(default=10, ge=0, description="Dataset passes for offline and patch attacks")
    batch: int = Field(default=64, ge=1)
    patch_pixels: int = Field(default=13, ge=1)
    draws_per_step: int = Field(default=1, ge=1, description="Monte-Carlo (k, eps) draws per PGD step")
    resample_reference: bool = Field(default=False, description="Resample tau* every PGD step")
    literal_forward: bool = Field(default=False, description="Use unscaled tau + eps forward sampling")
    seed: int = 0


class EvalConfig(StrictModel):
    episodes: int = Field(default=50, ge=1)
    conditions: list[ConditionKind] = Field(default_factory=lambda: [ConditionKind.CLEAN])
    modes: list[AttackMode] = Field(default_factory=lambda: [AttackMode.TARGETED])
    threads: int = Field(default=1, ge=1)
    sigma_values: list[float] = Field(default_factory=lambda: [0.01, 0.03, 0.05])
    step_values: list[int] = Field(default_factory=lambda: [10, 20, 50])
    timing_repetitions: int = Field(default=20, ge=1)
    encoder_images: int = Field(default=1000, ge=1)


class PathsConfig(StrictModel):
    data: str = "runs/demos.dpab"
    checkpoint: str = "runs/policy.dpab"
    artifacts_dir: str = "runs/artifacts"
    report_dir: str = "runs/reports"
    ledger: str = "runs/ledger.db"


class RunConfig(StrictModel):
    """The resolved configuration document of one run."""
    seed: int = 0
    env: EnvConfig = Field(default_factory=EnvConfig)
    policy: PolicyConfig = Field(default_factory=PolicyConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    attack: AttackConfig = Field(default_factory=AttackConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)


# ============ Reports ============

class RunStamp(BaseModel):
    """Provenance embedded in every output file."""
    config_hash: str
    seed: int


class EpisodeRecord(BaseModel):
    seed: int
    score: float = Field(..., ge=0, le=1)
    success: bool
    steps: int
    attack_calls: int = 0
    attack_ms: float = Field(default=0.0, description="Mean attack wall time per inference")
    budget_violations: int = 0


class RolloutReport(BaseModel):
    """Per-episode results and aggregates of one benchmark condition."""
    condition: str
    episodes: list[EpisodeRecord]
    success_rate: float
    mean_score: float
    mean_attack_ms: float
    total_attack_ms: float
    stamp: Optional[RunStamp] = None

    @classmethod
    def from_episodes(cls, condition: str, episodes: list[EpisodeRecord],
                      stamp: Optional[RunStamp] = None) -> "RolloutReport":
        n = len(episodes)
        attacked = [e for e in episodes if e.attack_calls > 0]
        total_ms = sum(e.attack_ms * e.attack_calls for e in attacked)
        calls = sum(e.attack_calls for e in attacked)
        return cls(
            condition=condition,
            episodes=episodes,
            success_rate=sum(e.success for e in episodes) / n if n else 0.0,
            mean_score=sum(e.score for e in episodes) / n if n else 0.0,
            mean_attack_ms=total_ms / calls if calls else 0.0,
            total_attack_ms=total_ms,
            stamp=stamp,
        )

    def is_consistent(self) -> bool:
        fresh = RolloutReport.from_episodes(self.condition, self.episodes, self.stamp)
        return (fresh.success_rate, fresh.mean_score) == (self.success_rate, self.mean_score)

    @property
    def budget_violations(self) -> int:
        return sum(e.budget_violations for e in self.episodes)


class BenchmarkDocument(BaseModel):
    """Contents of a benchmark JSON report file."""
    stamp: Optional[RunStamp] = None
    reports: list[RolloutReport] = Field(default_factory=list)


class AblationRow(BaseModel):
    sigma: float
    steps: int
    alpha: float
    success_rate: float
    mean_score: float
    sign_test_p: Optional[float] = Field(default=None, description="One-sided p vs previous row")


class AblationTable(BaseModel):
    axis: str
    condition: str
    rows: list[AblationRow]
    stamp: Optional[RunStamp] = None


class TimingRow(BaseModel):
    method: str
    mode: AttackMode
    repetitions: int
    median_s: float
    p95_s: float


class TimingTable(BaseModel):
    rows: list[TimingRow]
    cpu: str
    threads: int
    stamp: Optional[RunStamp] = None


class DistanceSummary(BaseModel):
    mean: float
    q1: float
    median: float
    q3: float


class EncoderAnalysisReport(BaseModel):
    sample_count: int
    sigma: float
    random_distances: list[float]
    adversarial_distances: list[float]
    random_summary: DistanceSummary
    adversarial_summary: DistanceSummary
    stamp: Optional[RunStamp] = None


# ============ Run ledger ============

class RunRecord(BaseModel):
    """Full run record from the ledger."""
    id: str
    command: str
    status: RunStatus
    config_hash: str
    seed: int
    args: dict
    outputs: Optional[dict] = None
    error: Optional[str] = None
    created_at: datetime
    completed_at: Optional[datetime] = None


class RunSummary(BaseModel):
    id: str
    command: str
    status: RunStatus
    config_hash: str
    created_at: datetime
