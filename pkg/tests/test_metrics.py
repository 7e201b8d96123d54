from math import inf, log10

import numpy as np
import pytest

from sci_radiance.exceptions import DimensionMismatchError, ImageTooSmallError
from sci_radiance.geometry import compose, se3_exp
from sci_radiance.metrics import (
    METRIC_COLUMNS,
    SSIM_K1,
    evaluate_frames,
    psnr,
    ssim,
    trajectory_error,
)
from sci_radiance.model import ImagePair, Pose, Twist


def pair(reference: np.ndarray, candidate: np.ndarray) -> ImagePair:
    return ImagePair(reference=reference, candidate=candidate)


def test_psnr_identical_images_is_inf(rng: np.random.Generator) -> None:
    image = rng.random((8, 8, 3))

    assert psnr(pair(image, image)) == inf


def test_psnr_arithmetic() -> None:
    score = psnr(pair(np.zeros((4, 4)), np.full((4, 4), 0.1)))

    assert np.isclose(score, 20.0)


def test_psnr_matches_direct_computation(rng: np.random.Generator) -> None:
    a = rng.random((16, 12, 3))
    b = rng.random((16, 12, 3))

    expected = 10 * log10(1.0 / np.mean((a - b) ** 2))

    assert abs(psnr(pair(a, b)) - expected) <= 1e-9
    assert psnr(pair(a, b)) == psnr(pair(b, a))


def test_psnr_decreases_with_noise(rng: np.random.Generator) -> None:
    reference = rng.uniform(0.3, 0.7, (32, 32))
    noise = rng.normal(size=reference.shape)

    scores = [
        psnr(pair(reference, reference + level * noise))
        for level in (0.01, 0.02, 0.04, 0.06, 0.08)
    ]

    assert all(a > b for a, b in zip(scores, scores[1:]))


def test_image_pair_clamps_values() -> None:
    image_pair = pair(np.full((2, 2), 1.5), np.full((2, 2), -0.5))

    assert np.array_equal(image_pair.reference, np.ones((2, 2)))
    assert np.array_equal(image_pair.candidate, np.zeros((2, 2)))


def test_image_pair_dimension_mismatch() -> None:
    with pytest.raises(DimensionMismatchError):
        pair(np.zeros((4, 4)), np.zeros((4, 5)))


def test_ssim_identical_images(rng: np.random.Generator) -> None:
    image = rng.random((16, 16, 3))

    assert abs(ssim(pair(image, image)) - 1.0) <= 1e-9


def test_ssim_inverted_binary_image(rng: np.random.Generator) -> None:
    reference = (rng.random((24, 24)) > 0.5).astype(np.float64)

    assert ssim(pair(reference, 1.0 - reference)) < 0.2


def test_ssim_constant_images_use_luminance_only() -> None:
    c1 = SSIM_K1**2
    mu_a, mu_b = 0.2, 0.7

    score = ssim(pair(np.full((16, 16), mu_a), np.full((16, 16), mu_b)))

    expected = (2 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    assert abs(score - expected) <= 1e-9


def test_ssim_too_small() -> None:
    with pytest.raises(ImageTooSmallError):
        ssim(pair(np.zeros((10, 16)), np.zeros((10, 16))))


def test_ssim_noise_lowers_score(rng: np.random.Generator) -> None:
    reference = rng.random((20, 20, 3))
    noisy = reference + rng.normal(0, 0.1, reference.shape)

    assert ssim(pair(reference, noisy)) < ssim(pair(reference, reference))


def test_evaluate_frames(rng: np.random.Generator) -> None:
    reference = rng.random((3, 12, 12, 3))
    candidate = reference.copy()
    candidate[1] = np.clip(candidate[1] + 0.05, 0, 1)

    data = evaluate_frames(reference, candidate)

    assert list(data.columns) == METRIC_COLUMNS
    assert data["frame_index"].tolist() == ["1", "2", "3", "mean"]
    assert data["psnr_db"].iloc[0] == inf
    assert np.isfinite(data["psnr_db"].iloc[1])
    assert data["psnr_db"].iloc[3] == inf
    assert np.isclose(data["ssim"].iloc[3], data["ssim"].iloc[:3].mean())


def test_evaluate_frames_shape_mismatch() -> None:
    with pytest.raises(DimensionMismatchError):
        evaluate_frames(np.zeros((2, 12, 12)), np.zeros((3, 12, 12)))


def test_trajectory_error_identical() -> None:
    start = Pose.identity()
    end = Pose(rotation=np.eye(3), translation=np.array([0.2, 0.0, 0.0]))

    error = trajectory_error(start, end, start, end)

    assert error.translation_error == 0.0
    assert error.rotation_error_degrees == 0.0
    assert error.relative_error == 0.0


def test_trajectory_error_ignores_rigid_offset() -> None:
    offset = se3_exp(
        Twist(rho=np.array([0.5, -1.0, 0.3]), phi=np.array([0.2, 0.1, -0.3]))
    )
    start = Pose.identity()
    end = Pose(rotation=np.eye(3), translation=np.array([0.2, 0.0, 0.0]))

    error = trajectory_error(compose(offset, start), compose(offset, end), start, end)

    assert error.translation_error <= 1e-12
    assert error.rotation_error_degrees <= 1e-6


def test_trajectory_error_relative_to_length() -> None:
    start = Pose.identity()
    end = Pose(rotation=np.eye(3), translation=np.array([0.2, 0.0, 0.0]))
    recovered_end = Pose(rotation=np.eye(3), translation=np.array([0.22, 0.0, 0.0]))

    error = trajectory_error(start, recovered_end, start, end)

    assert np.isclose(error.translation_error, 0.02)
    assert np.isclose(error.relative_error, 0.1)


def test_trajectory_error_zero_length() -> None:
    start = Pose.identity()

    error = trajectory_error(start, start, start, start)

    assert error.relative_error == inf


def test_trajectory_error_half_turn() -> None:
    start = Pose.identity()
    end = Pose(rotation=np.eye(3), translation=np.array([0.2, 0.0, 0.0]))
    flipped = Pose(rotation=np.diag([-1.0, -1.0, 1.0]), translation=end.translation)

    error = trajectory_error(start, flipped, start, end)

    assert error.rotation_error_degrees == 180.0
    assert error.translation_error == 0.0
