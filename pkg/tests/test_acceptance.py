"""
Trained-policy acceptance runs. Slow (tens of CPU minutes); run with `pytest -m acceptance`.
"""
import asyncio

import numpy as np
import pytest

from attacks import AffineTransformFamily, attack_offline_global, attack_patch
from evaluation import (
    Condition,
    ablation_sweep,
    build_conditions,
    encoder_analysis,
    paired_sign_test,
    run_benchmark,
    timing_comparison,
)
from envs import generate_dataset, reset, score_episode, scripted_expert, step
from model import AttackConfig, AttackMode, ConditionKind, EnvConfig, PolicyConfig
from policy import Observation, train_policy
from utils import SeedStreams

pytestmark = pytest.mark.acceptance

EPISODES = 50


@pytest.fixture(scope="module")
def demos():
    return generate_dataset(150, 200, seed=0)


@pytest.fixture(scope="module")
def trained_policy(demos):
    return train_policy(demos, epochs=60, batch=64, lr=1e-3, seed=0, config=PolicyConfig())


@pytest.fixture(scope="module")
def benchmark(trained_policy):
    conditions = build_conditions(
        [ConditionKind.CLEAN, ConditionKind.RANDOM_NOISE, ConditionKind.ONLINE],
        [AttackMode.TARGETED, AttackMode.UNTARGETED],
    )
    reports = asyncio.run(run_benchmark(trained_policy, EnvConfig(), conditions, EPISODES, 0, AttackConfig()))
    return {r.condition: r for r in reports}


@pytest.fixture(scope="module")
def offline_delta(trained_policy, demos):
    return attack_offline_global(trained_policy, demos, AttackConfig())


@pytest.fixture(scope="module")
def artifact_benchmark(trained_policy, demos, offline_delta):
    patch = attack_patch(trained_policy, demos, AffineTransformFamily(), AttackConfig())
    conditions = build_conditions(
        [ConditionKind.OFFLINE, ConditionKind.PATCH, ConditionKind.RANDOM_PATCH],
        [AttackMode.TARGETED],
        {"offline": offline_delta, "patch": patch},
    )
    reports = asyncio.run(run_benchmark(trained_policy, EnvConfig(), conditions, EPISODES, 0, AttackConfig()))
    return {r.condition: r for r in reports}


@pytest.fixture(scope="module")
def ablations(trained_policy):
    return {axis: asyncio.run(ablation_sweep(trained_policy, EnvConfig(), axis, n_episodes=EPISODES))
            for axis in ("sigma", "steps")}


def _successes(report):
    return [e.success for e in report.episodes]


def test_expert_solves_seeded_episodes():
    streams = SeedStreams(0)
    solved = 0
    for i in range(200):
        state = reset(streams.seed("env", i))
        coverages = []
        for _ in range(200):
            state, cov = step(state, scripted_expert(state))
            coverages.append(cov)
        solved += score_episode(coverages)[1]
    assert solved >= 190


def test_clean_policy_is_competent(benchmark):
    assert benchmark["clean"].success_rate >= 0.7


def test_random_noise_barely_degrades(benchmark):
    assert benchmark["clean"].success_rate - benchmark["random-noise"].success_rate < 0.15


def test_online_attacks_degrade_significantly(benchmark):
    clean = benchmark["clean"]
    targeted = benchmark["targeted-online"]
    untargeted = benchmark["untargeted-online"]
    assert clean.success_rate - targeted.success_rate >= 0.5
    assert paired_sign_test(_successes(clean), _successes(targeted)) < 0.05
    assert clean.success_rate - untargeted.success_rate >= 0.3


def test_offline_perturbation_transfers_across_episodes(benchmark, artifact_benchmark):
    offline = artifact_benchmark["targeted-offline"]
    assert benchmark["clean"].success_rate - offline.success_rate >= 0.25
    assert offline.success_rate < benchmark["random-noise"].success_rate


def test_trained_patch_beats_random_patch(artifact_benchmark):
    random_patch = artifact_benchmark["random-patch"]
    trained = artifact_benchmark["targeted-patch"]
    assert random_patch.success_rate - trained.success_rate >= 0.15


@pytest.mark.parametrize("axis", ["sigma", "steps"])
def test_larger_budgets_and_more_steps_hurt_more(ablations, axis):
    table = ablations[axis]
    rates = [row.success_rate for row in table.rows]
    assert len(rates) == 3
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert max(a - b for a, b in zip(rates, rates[1:])) >= 0.1
    for row in table.rows:
        assert row.alpha == pytest.approx(2 * row.sigma / row.steps)


def test_adversarial_noise_moves_the_feature_further(trained_policy, demos, offline_delta):
    report = encoder_analysis(trained_policy, demos, n_images=1000, sigma=0.03, artifact=offline_delta)
    assert report.sample_count == 1000
    assert report.adversarial_summary.mean >= 2 * report.random_summary.mean


def test_budget_holds_on_every_attacked_frame(benchmark, artifact_benchmark):
    reports = [*benchmark.values(), *artifact_benchmark.values()]
    assert sum(r.budget_violations for r in reports) == 0


def test_noise_prediction_attack_is_faster(trained_policy):
    rng = np.random.default_rng(0)
    observations = [Observation(rng.uniform(0, 1, (2, 3, 64, 64)), np.array([0.5, 0.5, 0.0, 0.0]))
                    for _ in range(5)]
    table = timing_comparison(trained_policy, observations, AttackConfig(), repetitions=20,
                              modes=(AttackMode.TARGETED,))
    median = {row.method: row.median_s for row in table.rows}
    assert median["end2end-ddpm"] >= 10 * median["noise-prediction"]
    assert median["end2end-ddim8"] >= 2 * median["noise-prediction"]


def test_reports_are_reproducible(trained_policy, benchmark):
    [again] = asyncio.run(run_benchmark(trained_policy, EnvConfig(), [Condition(ConditionKind.CLEAN)],
                                        EPISODES, 0))
    assert again.episodes == benchmark["clean"].episodes
