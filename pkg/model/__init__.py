from model.models import (
    AttackMode,
    AttackLoss,
    ConditionKind,
    RunStatus,
    EnvConfig,
    PolicyConfig,
    TrainConfig,
    AttackConfig,
    EvalConfig,
    PathsConfig,
    RunConfig,
    RunStamp,
    EpisodeRecord,
    RolloutReport,
    BenchmarkDocument,
    AblationRow,
    AblationTable,
    TimingRow,
    TimingTable,
    DistanceSummary,
    EncoderAnalysisReport,
    RunRecord,
    RunSummary,
)

__all__ = [
    "AttackMode",
    "AttackLoss",
    "ConditionKind",
    "RunStatus",
    "EnvConfig",
    "PolicyConfig",
    "TrainConfig",
    "AttackConfig",
    "EvalConfig",
    "PathsConfig",
    "RunConfig",
    "RunStamp",
    "EpisodeRecord",
    "RolloutReport",
    "BenchmarkDocument",
    "AblationRow",
    "AblationTable",
    "TimingRow",
    "TimingTable",
    "DistanceSummary",
    "EncoderAnalysisReport",
    "RunRecord",
    "RunSummary",
]
