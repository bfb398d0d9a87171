from diffusion.schedule import NoiseSchedule, ScheduleError
from diffusion.sampler import (
    Denoiser,
    SamplingNoise,
    SchedulerSpec,
    ddim_step,
    ddpm_step,
    denoising_loss,
    forward_sample,
    predict_x0,
    sample_loop,
)

__all__ = [
    "NoiseSchedule",
    "ScheduleError",
    "Denoiser",
    "SamplingNoise",
    "SchedulerSpec",
    "ddim_step",
    "ddpm_step",
    "denoising_loss",
    "forward_sample",
    "predict_x0",
    "sample_loop",
]
