from evaluation.benchmark import (
    BenchmarkError,
    Condition,
    build_conditions,
    first_observations,
    run_benchmark,
    run_condition,
    run_episode,
)
from evaluation.ablation import ablation_sweep, step_size, sweep_settings
from evaluation.timing import TIMING_METHODS, TimingStats, cpu_model, timing_comparison
from evaluation.encoder_analysis import encoder_analysis, feature_distance, select_windows, summarize
from evaluation.stats import paired_sign_test
from evaluation.reports import (
    BENCHMARK_COLUMNS,
    dump_frames,
    emit_ablation,
    emit_encoder_analysis,
    emit_reports,
    emit_timing,
    load_reports,
)

__all__ = [
    "BenchmarkError",
    "Condition",
    "build_conditions",
    "first_observations",
    "run_benchmark",
    "run_condition",
    "run_episode",
    "ablation_sweep",
    "step_size",
    "sweep_settings",
    "TIMING_METHODS",
    "TimingStats",
    "cpu_model",
    "timing_comparison",
    "encoder_analysis",
    "feature_distance",
    "select_windows",
    "summarize",
    "paired_sign_test",
    "BENCHMARK_COLUMNS",
    "dump_frames",
    "emit_ablation",
    "emit_encoder_analysis",
    "emit_reports",
    "emit_timing",
    "load_reports",
]
