import numpy as np
import pytest

from sci_radiance.exceptions import DimensionMismatchError, ZeroMaskPixelError
from sci_radiance.gaptv import (
    gap_tv_decode,
    project_measurement,
    total_variation,
    tv_denoise,
)
from sci_radiance.model import (
    CameraConfig,
    DatasetConfig,
    GapTvConfig,
    MaskStack,
    Measurement,
    SamplingConfig,
)
from sci_radiance.scene import make_dataset_from_config
from sci_radiance.sci import encode_measurement, forward_operator


def step_edge(size: int = 16) -> np.ndarray:
    image = np.zeros((size, size))
    image[:, size // 2 :] = 1.0
    return image


def test_tv_denoise_vanishing_weight_is_identity(rng: np.random.Generator) -> None:
    image = rng.random((12, 10, 3))

    denoised = tv_denoise(image, 1e-8)

    assert np.max(np.abs(denoised - image)) <= 1e-6


def test_tv_denoise_keeps_constant_image() -> None:
    image = np.full((9, 7), 0.3)

    assert np.array_equal(tv_denoise(image, 0.5), image)


def test_tv_denoise_smooths_step_edge() -> None:
    image = step_edge()

    denoised = tv_denoise(image, 0.1)

    assert denoised.shape == image.shape
    assert total_variation(denoised) < total_variation(image)
    assert np.linalg.norm(denoised - image) > 0


@pytest.mark.parametrize("weight", [0.01, 0.1, 0.5])
def test_tv_denoise_never_increases_tv(
    rng: np.random.Generator, weight: float
) -> None:
    image = rng.random((16, 16, 3))

    assert total_variation(tv_denoise(image, weight)) <= total_variation(image)


@pytest.mark.parametrize("weight", [0.0, -0.1])
def test_tv_denoise_rejects_non_positive_weight(weight: float) -> None:
    with pytest.raises(ValueError, match="positive"):
        tv_denoise(np.zeros((4, 4)), weight)


def test_total_variation_of_step_edge() -> None:
    assert total_variation(step_edge(8)) == 8.0


def test_projection_is_measurement_consistent(
    rng: np.random.Generator, small_stack: MaskStack
) -> None:
    masks = small_stack.masks.astype(np.float64)
    measurement = rng.random((8, 8, 3))

    projected = project_measurement(rng.random((4, 8, 8, 3)), measurement, masks)

    assert np.allclose(forward_operator(projected, masks), measurement, atol=1e-12)


def test_gap_tv_single_frame_recovers_measurement(rng: np.random.Generator) -> None:
    frames = rng.random((1, 8, 8, 3))
    stack = MaskStack(masks=np.ones((1, 8, 8), dtype=np.uint8), seed=0, target_or=1.0)
    measurement = encode_measurement(frames, stack)

    recovered = gap_tv_decode(measurement, stack, GapTvConfig(outer_iterations=5))

    assert recovered.shape == (1, 8, 8, 3)
    assert np.allclose(recovered[0], measurement.pixels, atol=1e-6)


@pytest.mark.parametrize("acceleration", [True, False])
def test_gap_tv_constant_frames(small_stack: MaskStack, acceleration: bool) -> None:
    frames = np.full((4, 8, 8, 3), 0.4)
    measurement = encode_measurement(frames, small_stack)
    cfg = GapTvConfig(outer_iterations=10, acceleration=acceleration)

    recovered = gap_tv_decode(measurement, small_stack, cfg)

    assert np.max(np.abs(recovered - frames)) <= 1e-3


@pytest.mark.parametrize("preset", ["sparse", "cluster", "clutter"])
def test_gap_tv_objective_is_non_increasing(preset: str) -> None:
    dataset = make_dataset_from_config(
        DatasetConfig(preset=preset, n_frames=8, overlap_rate=0.25),
        CameraConfig(width=32, height=32),
        SamplingConfig(),
    )
    cfg = GapTvConfig(outer_iterations=30)

    _, history = gap_tv_decode(
        dataset.measurement, dataset.stack, cfg, return_history=True
    )

    assert not cfg.acceleration
    assert len(history) == 30
    assert np.all(np.diff(history) <= 1e-8)


def test_gap_tv_output_is_clamped(
    rng: np.random.Generator, small_stack: MaskStack
) -> None:
    measurement = encode_measurement(rng.random((4, 8, 8)), small_stack)

    recovered = gap_tv_decode(measurement, small_stack, GapTvConfig(outer_iterations=4))

    assert recovered.shape == (4, 8, 8, 1)
    assert recovered.min() >= 0.0
    assert recovered.max() <= 1.0


def test_gap_tv_zero_mask_pixel(small_stack: MaskStack) -> None:
    masks = small_stack.masks.copy()
    masks[:, 3, 5] = 0
    stack = MaskStack(masks=masks, seed=0, target_or=0.5)
    measurement = Measurement(pixels=np.zeros((8, 8, 3), dtype=np.float32))

    with pytest.raises(ZeroMaskPixelError, match="1 pixels"):
        gap_tv_decode(measurement, stack, GapTvConfig())


def test_gap_tv_dimension_mismatch(small_stack: MaskStack) -> None:
    measurement = Measurement(pixels=np.zeros((6, 8, 3), dtype=np.float32))

    with pytest.raises(DimensionMismatchError):
        gap_tv_decode(measurement, small_stack, GapTvConfig())
