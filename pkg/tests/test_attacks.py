import logging
import math

import numpy as np
import pytest

from attacks import (
    AffineTransform,
    AffineTransformFamily,
    BudgetViolationError,
    GlobalPerturbation,
    PatchArtifact,
    adv_loss,
    apply,
    attack_offline_global,
    attack_online_global,
    attack_patch,
    end2end_attack,
    end2end_loss,
    expected_adv_loss,
    expected_patch_loss,
    export_patch_ppm,
    load_artifact,
    mode_sign,
    perturbed_frames,
    pgd_update,
    random_noise_baseline,
    replace,
    save_artifact,
    target_trajectory,
)
from core import DimensionError, Tensor, backward, check_gradient, mean, mul
from diffusion import SamplingNoise, SchedulerSpec
from model import AttackConfig, AttackMode
from utils import load_ppm

from conftest import RESOLUTION


def test_pgd_update_steps_against_the_gradient_and_projects():
    delta = np.array([0.0, 0.029, -0.029])
    grad = np.array([1.0, -1.0, 1.0])
    np.testing.assert_allclose(pgd_update(delta, grad, 0.002, 0.03), [-0.002, 0.03, -0.03])


def test_mode_sign_and_default_target():
    assert mode_sign(AttackMode.TARGETED) == 1.0
    assert mode_sign(AttackMode.UNTARGETED) == -1.0
    np.testing.assert_array_equal(target_trajectory(AttackConfig(), (4, 2)), np.ones((4, 2)))
    with pytest.raises(DimensionError):
        target_trajectory(AttackConfig(target=[[1.0, 0.0]]), (4, 2))


def test_signed_gradient_step_lowers_the_fixed_draw_loss(tiny_policy, tiny_observation):
    tau = np.ones((1, 4, 2))
    frames = tiny_observation.frames[None]
    state = tiny_observation.agent_state[None]

    def loss_at(delta):
        leaf = Tensor(delta, requires_grad=True)
        loss = adv_loss(tiny_policy, perturbed_frames(frames, leaf), state, tau, AttackMode.TARGETED,
                        np.random.default_rng(0))
        return loss, leaf

    loss, leaf = loss_at(np.zeros_like(frames))
    backward(loss)
    stepped, _ = loss_at(pgd_update(np.zeros_like(frames), leaf.grad, 1e-4, 0.03))
    assert stepped.item() < loss.item()


def test_online_attack_lowers_the_monte_carlo_loss(tiny_policy, tiny_observation):
    cfg = AttackConfig(draws_per_step=4)
    result = attack_online_global(tiny_policy, tiny_observation, cfg, np.random.default_rng(0))
    state = tiny_observation.agent_state[None]

    def loss_at(frames):
        return expected_adv_loss(tiny_policy, frames[None], state, np.ones((1, 4, 2)), AttackMode.TARGETED,
                                 np.random.default_rng(1), draws=256)

    assert loss_at(result.apply_frames(tiny_observation.frames)) < loss_at(tiny_observation.frames)


def test_adv_loss_gradient_matches_finite_differences(tiny_policy, tiny_observation):
    state = tiny_observation.agent_state[None]
    tau = np.random.default_rng(5).uniform(-1, 1, (1, 4, 2))

    def fn(frames):
        return adv_loss(tiny_policy, frames, state, tau, AttackMode.UNTARGETED, np.random.default_rng(0))

    assert check_gradient(fn, tiny_observation.frames[None]) < 1e-4


def test_end2end_loss_gradient_through_a_two_step_chain(tiny_policy, tiny_observation):
    scheduler = SchedulerSpec.parse("ddim2")
    drawn = SamplingNoise.draw((1, 4, 2), tiny_policy.schedule, scheduler, np.random.default_rng(6))
    # small initial noise keeps the generated actions inside the output clamp
    noise = SamplingNoise(0.3 * drawn.initial, drawn.steps)
    cond = tiny_policy.observation_condition(tiny_observation).data

    def fn(c):
        return end2end_loss(tiny_policy, c, np.ones((1, 4, 2)), AttackMode.TARGETED, noise, scheduler)

    leaf = Tensor(cond, requires_grad=True)
    backward(fn(leaf))
    assert np.any(leaf.grad != 0.0)
    assert check_gradient(fn, cond) < 1e-3


def test_online_attack_respects_budget_and_is_seeded(tiny_policy, tiny_observation, fast_attack):
    a = attack_online_global(tiny_policy, tiny_observation, fast_attack, np.random.default_rng(1))
    b = attack_online_global(tiny_policy, tiny_observation, fast_attack, np.random.default_rng(1))
    assert a.delta.shape == tiny_observation.frames.shape
    assert np.max(np.abs(a.delta)) <= fast_attack.sigma
    np.testing.assert_array_equal(a.delta, b.delta)
    attacked = apply(tiny_observation, a)
    assert attacked.frames.min() >= 0.0 and attacked.frames.max() <= 1.0
    assert a.metadata["attack"] == "online"


def test_untargeted_online_attack_with_reference_resampling(tiny_policy, tiny_observation, fast_attack):
    cfg = fast_attack.model_copy(update={"mode": AttackMode.UNTARGETED, "resample_reference": True,
                                         "draws_per_step": 2})
    result = attack_online_global(tiny_policy, tiny_observation, cfg, np.random.default_rng(2))
    assert np.max(np.abs(result.delta)) <= cfg.sigma


def test_zero_budget_attack_is_identity(tiny_policy, tiny_observation, fast_attack):
    cfg = fast_attack.model_copy(update={"sigma": 0.0})
    result = attack_online_global(tiny_policy, tiny_observation, cfg, np.random.default_rng(0))
    np.testing.assert_array_equal(result.delta, 0.0)
    np.testing.assert_array_equal(apply(tiny_observation, result).frames, tiny_observation.frames)


def test_offline_attack_trains_one_shared_delta(tiny_policy, tiny_dataset, fast_attack):
    result = attack_offline_global(tiny_policy, tiny_dataset, fast_attack, np.random.default_rng(0))
    assert result.delta.shape == (3, RESOLUTION, RESOLUTION)
    assert result.shared
    assert np.max(np.abs(result.delta)) <= fast_attack.sigma
    assert len(result.metadata["epoch_losses"]) == 1
    assert result.metadata["alpha"] == fast_attack.dataset_alpha


def test_offline_attack_reports_an_unsaturated_budget(tiny_policy, tiny_dataset, fast_attack, caplog):
    timid = fast_attack.model_copy(update={"dataset_alpha": 0.001})
    with caplog.at_level(logging.WARNING, logger="attacks.global_attacks"):
        result = attack_offline_global(tiny_policy, tiny_dataset, timid, np.random.default_rng(0))
    assert np.max(np.abs(result.delta)) < timid.sigma
    assert "did not saturate" in caplog.text

    caplog.clear()
    bold = fast_attack.model_copy(update={"dataset_alpha": 0.05})
    with caplog.at_level(logging.WARNING, logger="attacks.global_attacks"):
        result = attack_offline_global(tiny_policy, tiny_dataset, bold, np.random.default_rng(0))
    assert np.max(np.abs(result.delta)) == pytest.approx(bold.sigma, abs=1e-9)
    assert "did not saturate" not in caplog.text


def test_end2end_attack_respects_budget(tiny_policy, tiny_observation, fast_attack):
    cfg = fast_attack.model_copy(update={"steps": 2})
    result = end2end_attack(tiny_policy, tiny_observation, cfg, np.random.default_rng(0))
    assert result.delta.shape == tiny_observation.frames.shape
    assert np.max(np.abs(result.delta)) <= cfg.sigma
    assert result.metadata["attack"] == "end2end-ddim3"


def test_random_noise_baseline():
    a = random_noise_baseline((2, 3, 4, 4), 0.03, 5)
    b = random_noise_baseline((2, 3, 4, 4), 0.03, 5)
    np.testing.assert_array_equal(a.delta, b.delta)
    assert np.max(np.abs(a.delta)) <= 0.03
    with pytest.raises(ValueError):
        random_noise_baseline((3, 4, 4), -1.0)


def test_random_noise_clips_about_a_third_of_entries():
    n = 200_000
    result = random_noise_baseline((n,), 0.03, 0)
    clipped = float(np.mean(np.abs(result.delta) == 0.03))
    p = 0.3173  # P(|Z| > 1)
    assert abs(clipped - p) < 3 * math.sqrt(p * (1 - p) / n)
    np.testing.assert_array_equal(random_noise_baseline((8,), 0.0, 0).delta, 0.0)


def test_expected_loss_is_nonnegative_for_targeted_mode(tiny_policy, tiny_observation):
    value = expected_adv_loss(tiny_policy, tiny_observation.frames[None], tiny_observation.agent_state[None],
                              np.ones((1, 4, 2)), AttackMode.TARGETED, np.random.default_rng(0), draws=8)
    assert value >= 0.0


def test_perturbation_validation():
    with pytest.raises(BudgetViolationError):
        GlobalPerturbation(np.full((3, 4, 4), 0.05), 0.03)
    with pytest.raises(DimensionError):
        GlobalPerturbation(np.zeros((4, 4)), 0.03)
    shared = GlobalPerturbation(np.full((3, 4, 4), 0.03), 0.03)
    out = shared.apply_frames(np.full((2, 3, 4, 4), 0.99))
    np.testing.assert_allclose(out, 1.0)
    with pytest.raises(TypeError):
        apply(None, PatchArtifact(np.zeros((3, 2, 2)), 0.1))


def test_affine_transform_algebra():
    t = AffineTransform(rotation=0.3, scale=1.5, shear_x=0.2, shear_y=-0.4)
    assert t.determinant == pytest.approx(1.5 ** 2)
    family = AffineTransformFamily()
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert family.contains(family.sample(rng))
    assert not family.contains(AffineTransform(rotation=math.radians(90)))


def test_identity_replace_pastes_patch_at_the_centre():
    images = Tensor(np.full((2, 3, RESOLUTION, RESOLUTION), 0.5))
    patch = Tensor(np.random.default_rng(0).uniform(0, 1, (3, 5, 5)))
    out = replace(images, patch, AffineTransform()).data
    for n in range(2):
        np.testing.assert_allclose(out[n, :, 6:11, 6:11], patch.data)
    mask = np.ones((RESOLUTION, RESOLUTION), dtype=bool)
    mask[6:11, 6:11] = False
    np.testing.assert_array_equal(out[:, :, mask], 0.5)


def test_replace_is_differentiable_in_the_patch():
    images = Tensor(np.random.default_rng(1).uniform(0, 1, (1, 3, RESOLUTION, RESOLUTION)))
    weights = Tensor(np.random.default_rng(2).standard_normal((1, 3, RESOLUTION, RESOLUTION)))
    transform = AffineTransform(shift_x=0.1, rotation=0.4, shear_x=0.2)

    def fn(p):
        return mean(mul(replace(images, p, transform), weights))

    assert check_gradient(fn, np.random.default_rng(3).uniform(0, 1, (3, 5, 5))) < 1e-6


def test_replace_rejects_bad_shapes():
    with pytest.raises(DimensionError):
        replace(Tensor(np.zeros((1, 3, 8, 6))), Tensor(np.zeros((3, 2, 2))), AffineTransform())
    with pytest.raises(DimensionError):
        replace(Tensor(np.zeros((1, 3, 8, 8))), Tensor(np.zeros((1, 2, 2))), AffineTransform())


def test_patch_attack_keeps_pixels_valid(tiny_policy, tiny_dataset, fast_attack):
    artifact = attack_patch(tiny_policy, tiny_dataset, AffineTransformFamily(), fast_attack,
                            np.random.default_rng(0), resolution=RESOLUTION)
    assert artifact.image.shape == (3, 5, 5)
    assert artifact.image.min() >= 0.0 and artifact.image.max() <= 1.0
    assert artifact.size == pytest.approx(5 / RESOLUTION)
    assert len(artifact.metadata["epoch_losses"]) == 1


def test_trained_patch_beats_its_random_start(tiny_policy, tiny_dataset, fast_attack):
    cfg = fast_attack.model_copy(update={"mode": AttackMode.UNTARGETED, "epochs": 10, "dataset_alpha": 0.02})
    family = AffineTransformFamily()
    trained = attack_patch(tiny_policy, tiny_dataset, family, cfg, np.random.default_rng(0), resolution=RESOLUTION)
    start = PatchArtifact.random(np.random.default_rng(0), cfg.patch_pixels, RESOLUTION)
    assert not np.array_equal(trained.image, start.image)

    def loss_of(image):
        return expected_patch_loss(tiny_policy, image, tiny_dataset, family, cfg, np.random.default_rng(1))

    assert loss_of(trained.image) < loss_of(start.image)


def test_artifact_round_trip(tmp_path):
    delta = random_noise_baseline((3, 8, 8), 0.03, 1)
    loaded = load_artifact(save_artifact(delta, tmp_path / "offline.dpab", {"config_hash": "x"}))
    assert isinstance(loaded, GlobalPerturbation)
    np.testing.assert_array_equal(loaded.delta, delta.delta.astype(np.float32))
    assert loaded.sigma == 0.03
    assert loaded.metadata["config_hash"] == "x"

    patch = PatchArtifact.random(np.random.default_rng(0), 5, RESOLUTION)
    path = save_artifact(patch, tmp_path / "patch.dpab")
    loaded_patch = load_artifact(path)
    assert isinstance(loaded_patch, PatchArtifact)
    assert loaded_patch.size == pytest.approx(patch.size)
    image = load_ppm(export_patch_ppm(loaded_patch, tmp_path / "patch.ppm"))
    assert image.shape == (3, 5, 5)
