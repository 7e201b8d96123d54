"""
Ablation sweeps over the mask overlapping rate and the compression ratio. Every
setting builds a fresh dataset, trains a grid and runs the GAP-TV baseline on the
same measurement.
"""
import logging
from typing import Iterable, Optional

import numpy.typing as npt
import pandas as pd

from sci_radiance.gaptv import gap_tv_decode
from sci_radiance.metrics import evaluate_frames
from sci_radiance.model import (
    CameraConfig,
    DatasetConfig,
    GapTvConfig,
    ToyScene,
    TrainConfig,
)
from sci_radiance.scene import dataset_trajectory, make_dataset, preset_scene
from sci_radiance.trainer import reconstruct_frames, train, trajectory_from_poses

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["setting", "value", "trainer_psnr", "gaptv_psnr"]


def mean_psnr(reference: npt.NDArray, candidate: npt.NDArray) -> float:
    metrics = evaluate_frames(reference, candidate)
    return float(metrics.iloc[-1]["psnr_db"])


def run_setting(
    scene: ToyScene,
    dataset_cfg: DatasetConfig,
    camera: CameraConfig,
    train_cfg: TrainConfig,
    gaptv_cfg: GapTvConfig,
) -> tuple[float, float]:
    """
    Mean PSNR of the trained reconstruction and of GAP-TV for one dataset setting.
    Known poses are used unless train_cfg.optimize_poses is set.
    """
    intr = camera.to_intrinsics()
    start, end = dataset_trajectory(dataset_cfg)
    dataset = make_dataset(
        scene,
        (start, end),
        intr,
        dataset_cfg.n_frames,
        dataset_cfg.overlap_rate,
        noise_sigma=dataset_cfg.noise_sigma,
        seed=dataset_cfg.seed,
        grid_resolution=dataset_cfg.grid_resolution,
        sampling=train_cfg.sampling,
        mask_mode=dataset_cfg.mask_mode,
        literal=train_cfg.literal_interpolation,
        novel_views=False,
    )
    trajectory = (
        None if train_cfg.optimize_poses else trajectory_from_poses(start, end)
    )
    result = train(
        dataset.measurement, dataset.stack, intr, train_cfg, trajectory=trajectory
    )
    frames = reconstruct_frames(
        result.grid,
        result.trajectory,
        intr,
        dataset_cfg.n_frames,
        train_cfg.sampling,
        literal=train_cfg.literal_interpolation,
        chunk_size=train_cfg.chunk_size,
        n_workers=train_cfg.n_workers,
    )
    baseline = gap_tv_decode(dataset.measurement, dataset.stack, gaptv_cfg)
    return mean_psnr(dataset.frames, frames), mean_psnr(dataset.frames, baseline)


def _sweep(
    setting: str,
    values: Iterable[float],
    dataset_cfg: DatasetConfig,
    camera: CameraConfig,
    train_cfg: TrainConfig,
    gaptv_cfg: GapTvConfig,
    scene: Optional[ToyScene],
) -> pd.DataFrame:
    if scene is None:
        scene = preset_scene(dataset_cfg.preset)
    rows = []
    for value in values:
        cfg = DatasetConfig(**{**dataset_cfg.model_dump(), setting: value})
        trainer_psnr, gaptv_psnr = run_setting(
            scene, cfg, camera, train_cfg, gaptv_cfg
        )
        logger.info(
            "%s=%s: trainer %.2f dB, GAP-TV %.2f dB",
            setting,
            value,
            trainer_psnr,
            gaptv_psnr,
        )
        rows.append((setting, value, trainer_psnr, gaptv_psnr))
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def overlap_sweep(
    rates: Iterable[float],
    dataset_cfg: DatasetConfig,
    camera: CameraConfig,
    train_cfg: TrainConfig,
    gaptv_cfg: GapTvConfig,
    scene: Optional[ToyScene] = None,
) -> pd.DataFrame:
    """Trainer and GAP-TV PSNR for every mask overlapping rate"""
    return _sweep(
        "overlap_rate", rates, dataset_cfg, camera, train_cfg, gaptv_cfg, scene
    )


def compression_sweep(
    ratios: Iterable[int],
    dataset_cfg: DatasetConfig,
    camera: CameraConfig,
    train_cfg: TrainConfig,
    gaptv_cfg: GapTvConfig,
    scene: Optional[ToyScene] = None,
) -> pd.DataFrame:
    """Trainer and GAP-TV PSNR for every compression ratio (number of frames)"""
    return _sweep("n_frames", ratios, dataset_cfg, camera, train_cfg, gaptv_cfg, scene)
