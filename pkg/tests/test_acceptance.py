"""
End-to-end recovery runs on the toy scenes. These take minutes each and are
deselected by default; run them with ``pytest -m slow``.
"""
import numpy as np
import pytest

from sci_radiance.experiments import (
    compression_sweep,
    mean_psnr,
    overlap_sweep,
    run_setting,
)
from sci_radiance.metrics import trajectory_error
from sci_radiance.model import (
    CameraConfig,
    DatasetConfig,
    GapTvConfig,
    SamplingConfig,
    TrainConfig,
)
from sci_radiance.scene import dataset_trajectory, make_dataset, preset_scene
from sci_radiance.trainer import (
    reconstruct_frames,
    train,
    trajectory_endpoints,
    trajectory_from_poses,
)

pytestmark = pytest.mark.slow

CAMERA = CameraConfig(width=64, height=64)
DATASET = DatasetConfig(preset="cluster", n_frames=8, overlap_rate=0.25)
GAPTV = GapTvConfig()


def known_pose_config(**kwargs) -> TrainConfig:
    values = dict(
        iterations=3000,
        batch_rays=1024,
        grid_resolution=48,
        sampling=SamplingConfig(n_samples=64),
        optimize_poses=False,
        n_workers=4,
    )
    values.update(kwargs)
    return TrainConfig(**values)


def test_known_pose_recovery() -> None:
    trainer_psnr, _ = run_setting(
        preset_scene("cluster"), DATASET, CAMERA, known_pose_config(), GAPTV
    )

    assert trainer_psnr >= 28.0


@pytest.mark.parametrize("preset", ["sparse", "cluster", "clutter"])
def test_trainer_beats_gaptv(preset: str) -> None:
    cfg = DATASET.model_copy(update={"preset": preset})

    trainer_psnr, gaptv_psnr = run_setting(
        preset_scene(preset), cfg, CAMERA, known_pose_config(), GAPTV
    )

    assert trainer_psnr - gaptv_psnr >= 2.0


def test_joint_pose_recovery() -> None:
    scene = preset_scene("cluster")
    intr = CAMERA.to_intrinsics()
    start, end = dataset_trajectory(DATASET)
    dataset = make_dataset(scene, (start, end), intr, 8, 0.25)

    known_cfg = known_pose_config()
    known = train(
        dataset.measurement,
        dataset.stack,
        intr,
        known_cfg,
        trajectory=trajectory_from_poses(start, end),
    )
    joint_cfg = known_pose_config(optimize_poses=True)
    joint = train(dataset.measurement, dataset.stack, intr, joint_cfg)

    rec_start, rec_end = trajectory_endpoints(joint.trajectory)
    error = trajectory_error(rec_start, rec_end, start, end)
    assert error.relative_error <= 0.1

    psnrs = [
        mean_psnr(
            dataset.frames,
            reconstruct_frames(result.grid, result.trajectory, intr, 8, cfg.sampling),
        )
        for result, cfg in ((known, known_cfg), (joint, joint_cfg))
    ]
    assert psnrs[1] >= psnrs[0] - 2.0


def test_overlap_rate_trend() -> None:
    results = overlap_sweep(
        [0.125, 0.25, 0.5, 0.75], DATASET, CAMERA, known_pose_config(), GAPTV
    )
    psnr = dict(zip(results["value"], results["trainer_psnr"]))

    assert psnr[0.75] == min(psnr.values())
    assert psnr[0.25] >= psnr[0.125] - 0.5


def test_compression_ratio_trend() -> None:
    results = compression_sweep([8, 24], DATASET, CAMERA, known_pose_config(), GAPTV)
    trainer_drop = results["trainer_psnr"].iloc[0] - results["trainer_psnr"].iloc[1]
    gaptv_drop = results["gaptv_psnr"].iloc[0] - results["gaptv_psnr"].iloc[1]

    assert trainer_drop <= 5.0
    assert gaptv_drop > trainer_drop


def test_training_is_reproducible() -> None:
    scene = preset_scene("cluster")
    intr = CAMERA.to_intrinsics()
    start, end = dataset_trajectory(DATASET)
    dataset = make_dataset(scene, (start, end), intr, 8, 0.25)
    cfg = known_pose_config(iterations=200, optimize_poses=True, deterministic=True)

    first = train(dataset.measurement, dataset.stack, intr, cfg)
    second = train(dataset.measurement, dataset.stack, intr, cfg)

    assert first.history.to_csv(index=False) == second.history.to_csv(index=False)
    assert np.array_equal(first.grid.density, second.grid.density)
