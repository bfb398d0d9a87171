import numpy as np
import pytest

from core import Tensor
from diffusion import (
    NoiseSchedule,
    SamplingNoise,
    ScheduleError,
    SchedulerSpec,
    ddim_step,
    denoising_loss,
    forward_sample,
    sample_loop,
)


class PointMassDenoiser:
    """The exact noise predictor when every training sample equals `center`."""

    def __init__(self, schedule: NoiseSchedule, center: np.ndarray):
        self.schedule = schedule
        self.center = center

    def predict(self, x_k, k, cond):
        ab = self.schedule.alpha_bar[np.asarray(k)]
        ab = ab.reshape((-1,) + (1,) * (x_k.ndim - 1)) if np.ndim(ab) else ab
        return Tensor((x_k.data - np.sqrt(ab) * self.center) / np.sqrt(1.0 - ab))


class TwoPointDenoiser:
    """The exact noise predictor for data split evenly between -1 and +1."""

    def __init__(self, schedule: NoiseSchedule):
        self.schedule = schedule

    def predict(self, x_k, k, cond):
        ab = self.schedule.alpha_bar[np.asarray(k)]
        ab = ab.reshape((-1,) + (1,) * (x_k.ndim - 1)) if np.ndim(ab) else ab
        posterior_mean = np.tanh(np.sqrt(ab) * x_k.data / (1.0 - ab))
        return Tensor((x_k.data - np.sqrt(ab) * posterior_mean) / np.sqrt(1.0 - ab))


@pytest.fixture
def schedule():
    return NoiseSchedule.linear(100, 1e-4, 2e-2)


def test_linear_schedule_coefficients(schedule):
    assert schedule.K == 100
    assert schedule.beta[0] == pytest.approx(1e-4)
    assert schedule.beta[-1] == pytest.approx(2e-2)
    assert np.all(np.diff(schedule.alpha_bar) < 0)
    assert schedule.eq1_sigma[0] == 0.0
    assert np.all(schedule.eq1_sigma[1:] > 0)
    np.testing.assert_allclose(schedule.eq1_alpha, 1.0 / np.sqrt(1.0 - schedule.beta))
    np.testing.assert_allclose(schedule.eq1_lambda, schedule.beta / np.sqrt(1.0 - schedule.alpha_bar))


def test_schedule_arrays_are_read_only(schedule):
    with pytest.raises(ValueError):
        schedule.beta[0] = 0.5


@pytest.mark.parametrize("beta", [[], [0.0, 0.1], [0.2, 0.1], [0.5, 1.0]])
def test_invalid_schedules_are_rejected(beta):
    with pytest.raises(ScheduleError):
        NoiseSchedule(np.array(beta))


def test_step_index_out_of_range(schedule):
    x0 = Tensor(np.zeros((2, 3)))
    with pytest.raises(ScheduleError):
        forward_sample(schedule, x0, 100, Tensor(np.zeros((2, 3))))
    with pytest.raises(ScheduleError):
        forward_sample(schedule, x0, -1, Tensor(np.zeros((2, 3))))


@pytest.mark.parametrize("text, expected", [("ddpm", "ddpm"), ("ddim8", "ddim8"), ("DDIM(16)", "ddim16")])
def test_scheduler_parsing(text, expected):
    assert str(SchedulerSpec.parse(text)) == expected


@pytest.mark.parametrize("text", ["ddim0", "ddim", "euler", ""])
def test_scheduler_parsing_rejects_unknown(text):
    with pytest.raises(ScheduleError):
        SchedulerSpec.parse(text)


def test_ddim_timesteps_are_evenly_spaced_and_end_at_zero(schedule):
    steps = SchedulerSpec.parse("ddim8").timesteps(schedule)
    assert len(steps) == 8
    assert steps[0] == 99 and steps[-1] == 0
    assert all(a > b for a, b in zip(steps, steps[1:]))


def test_ddim_step_requires_decreasing_levels(schedule):
    denoiser = PointMassDenoiser(schedule, np.zeros((1, 2)))
    with pytest.raises(ScheduleError):
        ddim_step(schedule, Tensor(np.zeros((1, 2))), 3, 5, denoiser, None)


def test_forward_sample_scaled_and_literal(schedule):
    x0, eps = Tensor(np.full((1, 2), 2.0)), Tensor(np.ones((1, 2)))
    scaled = forward_sample(schedule, x0, 10, eps).data
    ab = schedule.alpha_bar[10]
    np.testing.assert_allclose(scaled, 2.0 * np.sqrt(ab) + np.sqrt(1.0 - ab))
    np.testing.assert_allclose(forward_sample(schedule, x0, 10, eps, literal=True).data, 3.0)


def test_forward_sample_moments(schedule):
    n, k = 100_000, 50
    ab = schedule.alpha_bar[k]
    x0 = Tensor(np.full((n, 1), 0.7))
    eps = Tensor(np.random.default_rng(8).standard_normal((n, 1)))
    out = forward_sample(schedule, x0, k, eps).data.ravel()
    assert abs(out.mean() - np.sqrt(ab) * 0.7) < 3 * np.sqrt((1.0 - ab) / n)
    assert abs(out.var(ddof=1) - (1.0 - ab)) < 3 * (1.0 - ab) * np.sqrt(2.0 / (n - 1))


@pytest.mark.parametrize("scheduler", ["ddpm", "ddim8"])
def test_sampling_keeps_both_modes_of_a_mixture(schedule, scheduler):
    out = sample_loop(schedule, TwoPointDenoiser(schedule), None, (1000, 1), SchedulerSpec.parse(scheduler),
                      rng=np.random.default_rng(9)).data.ravel()
    assert np.mean(out > 0) >= 0.2
    assert np.mean(out < 0) >= 0.2
    assert np.mean(np.abs(np.abs(out) - 1.0) < 0.05) >= 0.95


@pytest.mark.parametrize("scheduler", ["ddpm", "ddim8", "ddim3"])
def test_exact_denoiser_recovers_the_data_point(schedule, scheduler):
    center = np.array([[0.25, -0.5], [1.0, 0.75]])
    denoiser = PointMassDenoiser(schedule, center)
    out = sample_loop(schedule, denoiser, None, center.shape, SchedulerSpec.parse(scheduler),
                      rng=np.random.default_rng(4))
    np.testing.assert_allclose(out.data, center, atol=1e-6)


def test_exact_denoiser_has_zero_training_loss(schedule):
    center = np.array([[0.1, 0.2]])
    denoiser = PointMassDenoiser(schedule, center)
    x0 = Tensor(np.broadcast_to(center, (8, 1, 2)).copy())
    loss = denoising_loss(schedule, denoiser, x0, None, np.random.default_rng(0))
    assert loss.item() < 1e-20


def test_sampling_noise_replays_the_chain(schedule):
    class Shrink:
        def predict(self, x_k, k, cond):
            return Tensor(0.1 * x_k.data)

    spec = SchedulerSpec.parse("ddpm")
    noise = SamplingNoise.draw((2, 3), schedule, spec, np.random.default_rng(1))
    assert 0 not in noise.steps and len(noise.steps) == schedule.K - 1
    a = sample_loop(schedule, Shrink(), None, (2, 3), spec, noise=noise)
    b = sample_loop(schedule, Shrink(), None, (2, 3), spec, noise=noise)
    np.testing.assert_array_equal(a.data, b.data)


def test_sample_loop_needs_randomness(schedule):
    with pytest.raises(ScheduleError):
        sample_loop(schedule, PointMassDenoiser(schedule, np.zeros(2)), None, (2,), SchedulerSpec.parse("ddim8"))
