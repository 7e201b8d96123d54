import numpy as np
import pytest
from pydantic import ValidationError

from sci_radiance.model import (
    DatasetConfig,
    Intrinsics,
    MaskStack,
    Measurement,
    Pose,
    Primitive,
    RadianceGrid,
    Ray,
    ToyScene,
    TrainConfig,
    TrajectoryParams,
    Twist,
)


def test_pose_matrix_round_trip() -> None:
    matrix = np.eye(4)
    matrix[:3, 3] = [1.0, 2.0, 3.0]

    pose = Pose.from_matrix(matrix[:3])

    assert np.array_equal(pose.matrix(), matrix)
    assert "translation=[1.0, 2.0, 3.0]" in repr(pose)


def test_pose_invalid_shape() -> None:
    with pytest.raises(ValidationError, match="rotation"):
        Pose(rotation=np.eye(4), translation=np.zeros(3))


def test_pose_rejects_unknown_fields() -> None:
    with pytest.raises(ValidationError):
        Pose(rotation=np.eye(3), translation=np.zeros(3), scale=1.0)


def test_twist_vector() -> None:
    vector = np.arange(6, dtype=np.float64)

    twist = Twist.from_vector(vector)

    assert np.array_equal(twist.rho, [0, 1, 2])
    assert np.array_equal(twist.phi, [3, 4, 5])
    assert np.array_equal(twist.vector(), vector)


def test_twist_invalid() -> None:
    with pytest.raises(ValueError, match="6 entries"):
        Twist.from_vector(np.zeros(5))
    with pytest.raises(ValidationError, match="finite"):
        Twist(rho=np.array([0.0, np.nan, 0.0]), phi=np.zeros(3))


def test_trajectory_params_vector() -> None:
    vector = np.linspace(-1, 1, 12)

    params = TrajectoryParams.from_vector(vector)

    assert np.array_equal(params.twist_end.rho, vector[6:9])
    assert np.array_equal(params.vector(), vector)


def test_intrinsics_principal_point_inside() -> None:
    with pytest.raises(ValidationError, match="cx"):
        Intrinsics(fx=10, fy=10, cx=20, cy=4, width=8, height=8)


def test_ray_direction_must_be_unit() -> None:
    with pytest.raises(ValidationError, match="unit norm"):
        Ray(origin=np.zeros(3), direction=np.array([0.0, 0.0, 2.0]), pixel=(0, 0))


def test_radiance_grid_layout() -> None:
    density = np.zeros((2, 3, 4))

    grid = RadianceGrid(
        bbox_min=np.zeros(3),
        bbox_max=np.ones(3),
        sh_degree=1,
        density=density,
        sh_coeffs=np.zeros((2, 3, 4, 4, 3)),
    )

    assert grid.resolution == (2, 3, 4)
    assert grid.n_coeffs == 4
    with pytest.raises(ValidationError, match="sh_coeffs"):
        RadianceGrid(
            bbox_min=np.zeros(3),
            bbox_max=np.ones(3),
            sh_degree=2,
            density=density,
            sh_coeffs=np.zeros((2, 3, 4, 4, 3)),
        )


def test_radiance_grid_invalid_bbox() -> None:
    with pytest.raises(ValidationError, match="bbox_min"):
        RadianceGrid(
            bbox_min=np.ones(3),
            bbox_max=np.ones(3),
            sh_degree=0,
            density=np.zeros((2, 2, 2)),
            sh_coeffs=np.zeros((2, 2, 2, 1, 3)),
        )


def test_mask_stack_binary() -> None:
    stack = MaskStack(masks=np.ones((3, 4, 5), dtype=np.uint8), seed=0, target_or=1)

    assert (stack.n_frames, stack.height, stack.width) == (3, 4, 5)
    with pytest.raises(ValidationError, match="0 or 1"):
        MaskStack(masks=np.full((1, 2, 2), 2, dtype=np.uint8), seed=0, target_or=1)


def test_measurement_channels() -> None:
    measurement = Measurement(pixels=np.zeros((4, 5, 1), dtype=np.float32))

    assert measurement.channels == 1
    with pytest.raises(ValidationError, match="channels"):
        Measurement(pixels=np.zeros((4, 5, 2), dtype=np.float32))


def test_train_config_schedules() -> None:
    with pytest.raises(ValidationError, match="lr_scene_end"):
        TrainConfig(lr_scene_start=1e-3, lr_scene_end=1e-2)


def test_train_config_full_scale_defaults() -> None:
    cfg = TrainConfig.full_scale_defaults(iterations=10)

    assert cfg.iterations == 10
    assert cfg.batch_rays == 5000
    assert cfg.lr_scene_start == 5e-4
    assert cfg.lr_pose_end == 1e-5
    assert not cfg.use_tv


@pytest.mark.parametrize(
    ("albedo", "size"), [((1.2, 0.0, 0.0), (1.0, 1.0, 1.0)), ((0.5,) * 3, (0,) * 3)]
)
def test_primitive_invalid(
    albedo: tuple[float, float, float], size: tuple[float, float, float]
) -> None:
    with pytest.raises(ValidationError):
        Primitive(shape="box", center=(0, 0, 4), size=size, albedo=albedo, density=1)


def test_scene_primitive_outside_bbox() -> None:
    primitive = Primitive(
        shape="sphere", center=(1.2, 0, 4), size=(0.5,) * 3, albedo=(1,) * 3, density=1
    )

    with pytest.raises(ValidationError, match="exceeds the bbox"):
        ToyScene(primitives=[primitive])


@pytest.mark.parametrize(
    ("n_frames", "overlap_rate", "mask_mode", "valid"),
    [
        (8, 0.25, "exact", True),
        (8, 0.3, "exact", False),
        (8, 0.3, "bernoulli", True),
        (3, 1.0, "exact", True),
    ],
)
def test_dataset_config_ones_count(
    n_frames: int, overlap_rate: float, mask_mode: str, valid: bool
) -> None:
    kwargs = dict(n_frames=n_frames, overlap_rate=overlap_rate, mask_mode=mask_mode)
    if valid:
        assert DatasetConfig(**kwargs).n_frames == n_frames
    else:
        with pytest.raises(ValidationError, match="integer"):
            DatasetConfig(**kwargs)
