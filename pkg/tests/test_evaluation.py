import asyncio
import csv

import numpy as np
import pytest

from attacks import GlobalPerturbation, PatchArtifact
from evaluation import (
    BenchmarkError,
    Condition,
    TimingStats,
    ablation_sweep,
    build_conditions,
    dump_frames,
    emit_reports,
    encoder_analysis,
    first_observations,
    load_reports,
    paired_sign_test,
    run_benchmark,
    select_windows,
    step_size,
    sweep_settings,
    timing_comparison,
)
from evaluation.reports import benchmark_rows
from model import AttackMode, ConditionKind, RunStamp
from utils import SeedStreams

from conftest import RESOLUTION

STAMP = RunStamp(config_hash="abc123", seed=0)


def _outcomes(report):
    return [(e.seed, e.score, e.success, e.steps, e.attack_calls) for e in report.episodes]


def test_build_conditions_expands_modes():
    conditions = build_conditions(
        [ConditionKind.CLEAN, ConditionKind.ONLINE, ConditionKind.RANDOM_NOISE],
        [AttackMode.TARGETED, AttackMode.UNTARGETED],
    )
    assert [c.label for c in conditions] == ["clean", "targeted-online", "untargeted-online", "random-noise"]


def test_build_conditions_resolves_artifacts():
    offline = GlobalPerturbation.zeros((3, 4, 4), 0.03, mode="untargeted")
    patch = PatchArtifact(np.zeros((3, 2, 2)), 0.1)
    conditions = build_conditions([ConditionKind.OFFLINE, ConditionKind.PATCH], [AttackMode.TARGETED],
                                  {"offline": offline, "targeted-patch": patch})
    assert [c.label for c in conditions] == ["untargeted-offline", "targeted-patch"]
    assert conditions[0].artifact is offline


def test_build_conditions_errors():
    offline = GlobalPerturbation.zeros((3, 4, 4), 0.03)
    patch = PatchArtifact(np.zeros((3, 2, 2)), 0.1)
    with pytest.raises(BenchmarkError):
        build_conditions([ConditionKind.OFFLINE], [AttackMode.TARGETED])
    with pytest.raises(BenchmarkError):
        build_conditions([ConditionKind.OFFLINE], [AttackMode.TARGETED], {"offline": patch})
    with pytest.raises(BenchmarkError):
        build_conditions([ConditionKind.CLEAN], [AttackMode.TARGETED], {"sideways": offline})
    with pytest.raises(BenchmarkError):
        build_conditions([ConditionKind.CLEAN], [AttackMode.TARGETED], {"online": offline})
    with pytest.raises(BenchmarkError):
        build_conditions([ConditionKind.OFFLINE], [AttackMode.TARGETED],
                         {"targeted-offline": offline, "offline": GlobalPerturbation.zeros((3, 4, 4), 0.03,
                                                                                           mode="targeted")})


def test_benchmark_is_deterministic_and_paired(tiny_policy, tiny_env, fast_attack):
    conditions = build_conditions(
        [ConditionKind.CLEAN, ConditionKind.RANDOM_NOISE, ConditionKind.ONLINE, ConditionKind.RANDOM_PATCH],
        [AttackMode.TARGETED],
    )
    first = asyncio.run(run_benchmark(tiny_policy, tiny_env, conditions, 2, 11, fast_attack, stamp=STAMP))
    second = asyncio.run(run_benchmark(tiny_policy, tiny_env, conditions, 2, 11, fast_attack, threads=2,
                                       stamp=STAMP))

    assert [r.condition for r in first] == ["clean", "random-noise", "targeted-online", "random-patch"]
    for a, b in zip(first, second):
        assert _outcomes(a) == _outcomes(b)
        assert a.is_consistent()
        assert a.stamp == STAMP
        assert a.budget_violations == 0
    seeds = {tuple(e.seed for e in r.episodes) for r in first}
    assert len(seeds) == 1

    clean, noise, online, random_patch = first
    assert all(e.attack_calls == 0 for e in clean.episodes)
    assert all(e.attack_calls == 3 for e in online.episodes)
    assert all(e.attack_calls == 3 for e in noise.episodes)
    assert all(e.attack_calls == 0 for e in random_patch.episodes)
    assert clean.mean_attack_ms == 0.0
    assert online.mean_attack_ms > 0.0


def test_benchmark_with_no_episodes(tiny_policy, tiny_env):
    [report] = asyncio.run(run_benchmark(tiny_policy, tiny_env, [Condition(ConditionKind.CLEAN)], 0))
    assert report.episodes == []
    assert report.success_rate == 0.0
    with pytest.raises(BenchmarkError):
        asyncio.run(run_benchmark(tiny_policy, tiny_env, [Condition(ConditionKind.CLEAN)], -1))


def test_first_observations(tiny_policy, tiny_env, fast_attack):
    streams = SeedStreams(0)
    clean, same = first_observations(tiny_policy, Condition(ConditionKind.CLEAN), 0, streams, tiny_env, fast_attack)
    np.testing.assert_array_equal(clean.frames, same.frames)
    assert clean.frames.shape == (2, 3, RESOLUTION, RESOLUTION)

    _, noisy = first_observations(tiny_policy, Condition(ConditionKind.RANDOM_NOISE), 0, streams, tiny_env,
                                  fast_attack)
    assert np.max(np.abs(noisy.frames - clean.frames)) <= fast_attack.sigma + 1e-12
    _, patched = first_observations(tiny_policy, Condition(ConditionKind.RANDOM_PATCH), 0, streams, tiny_env,
                                    fast_attack)
    assert not np.array_equal(patched.frames, clean.frames)
    np.testing.assert_array_equal(patched.agent_state, clean.agent_state)


def test_paired_sign_test():
    assert paired_sign_test([True] * 5, [False] * 5) == pytest.approx(1 / 32)
    assert paired_sign_test([True, False], [False, True]) == pytest.approx(0.75)
    assert paired_sign_test([True, False, True], [True, False, True]) == 1.0
    assert paired_sign_test([], []) == 1.0
    with pytest.raises(ValueError):
        paired_sign_test([True], [True, False])


def test_empty_reports_are_valid_files(tmp_path):
    json_path, csv_path = emit_reports([], tmp_path, stamp=STAMP)
    assert load_reports(json_path) == []
    with csv_path.open(newline="") as f:
        rows = list(csv.reader(f))
    assert rows == [["condition", "n", "success_rate", "mean_score", "mean_attack_ms", "config_hash", "seed"]]
    with pytest.raises(ValueError):
        emit_reports([], tmp_path, formats=("xml",))


def test_json_report_reaggregates_to_csv(tiny_policy, tiny_env, fast_attack, tmp_path):
    conditions = [Condition(ConditionKind.CLEAN), Condition(ConditionKind.RANDOM_NOISE)]
    reports = asyncio.run(run_benchmark(tiny_policy, tiny_env, conditions, 2, 3, fast_attack, stamp=STAMP))
    json_path, csv_path = emit_reports(reports, tmp_path / "reports")

    reloaded = load_reports(json_path)
    assert all(r.is_consistent() for r in reloaded)
    with csv_path.open(newline="") as f:
        rows = list(csv.DictReader(f))
    expected = [{k: str(v) for k, v in row.items()} for row in benchmark_rows(reloaded)]
    assert rows == expected
    assert csv_path.read_bytes().count(b"\r\n") == 3


def test_dump_frames(tiny_observation, tmp_path):
    written = dump_frames(tiny_observation, tiny_observation, tmp_path, "clean")
    assert [p.name for p in written] == ["clean_t0_clean.ppm", "clean_t0_attacked.ppm",
                                         "clean_t1_clean.ppm", "clean_t1_attacked.ppm"]
    assert all(p.exists() for p in written)


def test_sweep_settings_and_step_size():
    assert sweep_settings("sigma") == [(0.01, 50), (0.03, 50), (0.05, 50)]
    assert sweep_settings("steps", [5]) == [(0.03, 5)]
    assert step_size(0.03, 50) == pytest.approx(0.0012)
    with pytest.raises(BenchmarkError):
        sweep_settings("alpha")


def test_ablation_sweep_shares_seeds(tiny_policy, tiny_env, fast_attack):
    env = tiny_env.model_copy(update={"episode_len": 2})
    table = asyncio.run(ablation_sweep(tiny_policy, env, "steps", [1, 2], n_episodes=2, attack_cfg=fast_attack,
                                       stamp=STAMP))
    assert table.condition == "targeted-online"
    assert [(row.sigma, row.steps) for row in table.rows] == [(0.03, 1), (0.03, 2)]
    assert table.rows[0].alpha == pytest.approx(0.06)
    assert table.rows[0].sign_test_p is None
    assert 0.0 <= table.rows[1].sign_test_p <= 1.0


def test_timing_stats_percentiles():
    stats = TimingStats("noise-prediction", AttackMode.TARGETED)
    assert stats.percentile(50) is None
    for seconds in (1.0, 2.0, 3.0, 4.0):
        stats.add(seconds)
    assert stats.percentile(50) == pytest.approx(2.5)
    row = stats.row()
    assert row.repetitions == 4
    assert row.p95_s == pytest.approx(3.85)


def test_timing_comparison(tiny_policy, tiny_observation, fast_attack):
    cfg = fast_attack.model_copy(update={"steps": 1})
    table = timing_comparison(tiny_policy, [tiny_observation], cfg, repetitions=2,
                              modes=(AttackMode.TARGETED,), methods=("noise-prediction",), stamp=STAMP)
    [row] = table.rows
    assert row.method == "noise-prediction"
    assert row.repetitions == 2
    assert row.median_s > 0.0
    assert table.cpu
    with pytest.raises(ValueError):
        timing_comparison(tiny_policy, [], cfg)


def test_select_windows_is_seeded_and_ordered(tiny_dataset):
    assert len(select_windows(tiny_dataset, 100, 0)) == 9
    subset = select_windows(tiny_dataset, 4, 0)
    np.testing.assert_array_equal(subset, select_windows(tiny_dataset, 4, 0))
    assert [tuple(w) for w in subset] == sorted(tuple(w) for w in subset)


def test_encoder_analysis_at_zero_budget(tiny_policy, tiny_dataset, fast_attack):
    report = encoder_analysis(tiny_policy, tiny_dataset, n_images=3, sigma=0.0, cfg=fast_attack)
    assert report.sample_count == 3
    assert report.random_distances == [0.0, 0.0, 0.0]
    assert report.adversarial_distances == [0.0, 0.0, 0.0]


def test_encoder_analysis_with_offline_artifact(tiny_policy, tiny_dataset):
    artifact = GlobalPerturbation(np.full((3, RESOLUTION, RESOLUTION), 0.03), 0.03)
    report = encoder_analysis(tiny_policy, tiny_dataset, n_images=2, sigma=0.03, artifact=artifact, stamp=STAMP)
    assert len(report.random_distances) == len(report.adversarial_distances) == 2
    assert all(d > 0.0 for d in report.random_distances)
    assert report.adversarial_summary.q1 <= report.adversarial_summary.median <= report.adversarial_summary.q3


def test_encoder_distances_do_not_depend_on_window_order(tiny_policy, tiny_dataset, fast_attack):
    windows = select_windows(tiny_dataset, 4, 0)
    order = np.array([2, 0, 3, 1])
    forward = encoder_analysis(tiny_policy, tiny_dataset, sigma=0.03, cfg=fast_attack, windows=windows)
    shuffled = encoder_analysis(tiny_policy, tiny_dataset, sigma=0.03, cfg=fast_attack, windows=windows[order])
    np.testing.assert_array_equal(np.array(forward.random_distances)[order], shuffled.random_distances)
    np.testing.assert_array_equal(np.array(forward.adversarial_distances)[order], shuffled.adversarial_distances)
    for a, b in ((forward.random_summary, shuffled.random_summary),
                 (forward.adversarial_summary, shuffled.adversarial_summary)):
        assert b.mean == pytest.approx(a.mean, rel=1e-12)
        assert (b.q1, b.median, b.q3) == (a.q1, a.median, a.q3)
