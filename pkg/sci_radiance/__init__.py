"""Snapshot compressive imaging with radiance fields and joint trajectory recovery"""

from .cli import sci_radiance
from .field import render_frame, render_ray, render_ray_backward, sample_field
from .gaptv import gap_tv_decode, tv_denoise
from .geometry import generate_ray, interpolate_pose, se3_exp, se3_log
from .metrics import evaluate_frames, psnr, ssim
from .scene import bake_scene, make_dataset, preset_scene
from .sci import encode_measurement, generate_masks, overlapping_rate, sci_loss
from .trainer import adam_step, init_trajectory, lr_schedule, train

__all__ = [
    "adam_step",
    "bake_scene",
    "encode_measurement",
    "evaluate_frames",
    "gap_tv_decode",
    "generate_masks",
    "generate_ray",
    "init_trajectory",
    "interpolate_pose",
    "lr_schedule",
    "make_dataset",
    "overlapping_rate",
    "preset_scene",
    "psnr",
    "render_frame",
    "render_ray",
    "render_ray_backward",
    "sample_field",
    "sci_loss",
    "sci_radiance",
    "se3_exp",
    "se3_log",
    "ssim",
    "train",
    "tv_denoise",
]
