from math import pi, sqrt

import numpy as np
import pytest

from sci_radiance.exceptions import AngleNearPiError, PixelOutOfBoundsError
from sci_radiance.geometry import (
    compose,
    generate_ray,
    generate_rays,
    identity_pose,
    interpolate_pose,
    interpolate_pose_at,
    inverse,
    orthonormalize,
    pose_from_look_at,
    se3_exp,
    se3_log,
    skew,
    so3_exp,
)
from sci_radiance.model import Intrinsics, Pose, Twist


@pytest.fixture()
def intr() -> Intrinsics:
    return Intrinsics(fx=4.0, fy=4.0, cx=8.5, cy=6.5, width=16, height=12)


def random_pose(rng: np.random.Generator, max_angle: float = 1.0) -> Pose:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return se3_exp(
        Twist(rho=rng.normal(size=3), phi=axis * rng.uniform(0, max_angle))
    )


def test_skew_is_cross_product() -> None:
    v = np.array([0.3, -1.2, 2.0])
    u = np.array([1.5, 0.1, -0.7])
    assert np.allclose(skew(v) @ u, np.cross(v, u))


def test_se3_exp_zero_is_identity() -> None:
    pose = se3_exp(Twist.zero())

    assert np.array_equal(pose.rotation, np.eye(3))
    assert np.array_equal(pose.translation, np.zeros(3))


def test_se3_exp_rotation_about_z() -> None:
    pose = se3_exp(Twist(rho=np.zeros(3), phi=np.array([0, 0, pi / 2])))

    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert np.allclose(pose.rotation, expected, atol=1e-12)
    assert np.allclose(pose.translation, 0)


def test_se3_exp_small_angle_branch() -> None:
    phi = np.array([1e-10, -2e-10, 0.5e-10])
    pose = se3_exp(Twist(rho=np.array([1.0, 2.0, 3.0]), phi=phi))

    assert np.allclose(pose.rotation, np.eye(3) + skew(phi), atol=1e-15)
    assert np.allclose(pose.translation, [1.0, 2.0, 3.0], atol=1e-9)


def test_se3_log_identity_is_zero() -> None:
    xi = se3_log(identity_pose())

    assert np.array_equal(xi.vector(), np.zeros(6))


def test_se3_exp_log_round_trip(rng: np.random.Generator) -> None:
    for _ in range(1000):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        xi = Twist(rho=rng.normal(size=3), phi=axis * rng.uniform(0.0, 3.0))

        recovered = se3_log(se3_exp(xi))

        assert np.max(np.abs(recovered.vector() - xi.vector())) <= 1e-9


def test_se3_log_round_trip_at_fixed_angle(rng: np.random.Generator) -> None:
    axis = rng.normal(size=3)
    xi = Twist(rho=rng.normal(size=3), phi=0.3 * axis / np.linalg.norm(axis))

    assert np.allclose(se3_log(se3_exp(xi)).vector(), xi.vector(), atol=1e-9)


def test_se3_log_rotation_by_pi_raises() -> None:
    pose = Pose(rotation=np.diag([1.0, -1.0, -1.0]), translation=np.zeros(3))

    with pytest.raises(AngleNearPiError):
        se3_log(pose)


def test_compose_with_inverse_is_identity(rng: np.random.Generator) -> None:
    pose = random_pose(rng, max_angle=3.0)

    result = compose(pose, inverse(pose))

    assert np.allclose(result.rotation, np.eye(3), atol=1e-9)
    assert np.allclose(result.translation, 0, atol=1e-9)


def test_long_composition_chain_stays_orthonormal(rng: np.random.Generator) -> None:
    step = random_pose(rng, max_angle=0.05)
    pose = identity_pose()
    for _ in range(10_000):
        pose = compose(pose, step)

    error = pose.rotation.T @ pose.rotation - np.eye(3)
    assert np.max(np.abs(error)) <= 1e-6


def test_orthonormalize_projects_onto_so3(rng: np.random.Generator) -> None:
    rotation = so3_exp([0.2, -0.4, 0.1]) + rng.normal(0, 1e-3, (3, 3))

    projected = orthonormalize(rotation)

    assert np.allclose(projected.T @ projected, np.eye(3), atol=1e-12)
    assert np.isclose(np.linalg.det(projected), 1.0)


def test_interpolate_pose_endpoints(rng: np.random.Generator) -> None:
    start = random_pose(rng)
    end = random_pose(rng)

    first = interpolate_pose(start, end, 1, 8)
    last = interpolate_pose(start, end, 8, 8)

    assert np.array_equal(first.rotation, start.rotation)
    assert np.array_equal(first.translation, start.translation)
    assert np.allclose(last.rotation, end.rotation, atol=1e-9)
    assert np.allclose(last.translation, end.translation, atol=1e-9)


def test_interpolate_pose_pure_translation_midpoint() -> None:
    end = Pose(rotation=np.eye(3), translation=np.array([1.0, 0.0, 0.0]))

    mid = interpolate_pose(identity_pose(), end, 5, 9)

    assert np.allclose(mid.translation, [0.5, 0.0, 0.0], atol=1e-12)
    assert np.allclose(mid.rotation, np.eye(3), atol=1e-12)


def test_interpolate_pose_single_frame_is_start(rng: np.random.Generator) -> None:
    start = random_pose(rng)

    pose = interpolate_pose(start, random_pose(rng), 1, 1)

    assert np.array_equal(pose.translation, start.translation)


def test_interpolate_pose_literal_convention() -> None:
    end = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, 2.0]))

    first = interpolate_pose(identity_pose(), end, 1, 4, literal=True)
    last = interpolate_pose(identity_pose(), end, 4, 4, literal=True)

    assert np.allclose(first.translation, [0.0, 0.0, 0.5])
    assert np.allclose(last.translation, [0.0, 0.0, 2.0])


@pytest.mark.parametrize(("i", "n_frames"), [(0, 4), (5, 4), (1, 0)])
def test_interpolate_pose_invalid_index(i: int, n_frames: int) -> None:
    with pytest.raises(ValueError):  # noqa: PT011
        interpolate_pose(identity_pose(), identity_pose(), i, n_frames)


def test_interpolation_is_geodesic(rng: np.random.Generator) -> None:
    start = random_pose(rng)
    end = random_pose(rng)
    third = interpolate_pose(start, end, 3, 9)
    seventh = interpolate_pose(start, end, 7, 9)

    fifth = interpolate_pose(start, end, 5, 9)
    halfway = interpolate_pose_at(third, seventh, 0.5)

    assert np.allclose(halfway.rotation, fifth.rotation, atol=1e-7)
    assert np.allclose(halfway.translation, fifth.translation, atol=1e-7)


def test_generate_ray_principal_point(intr: Intrinsics) -> None:
    ray = generate_ray(intr, identity_pose(), (6, 8))

    assert np.allclose(ray.direction, [0.0, 0.0, 1.0])
    assert np.array_equal(ray.origin, np.zeros(3))
    assert ray.pixel == (6, 8)


def test_generate_ray_45_degrees(intr: Intrinsics) -> None:
    ray = generate_ray(intr, identity_pose(), (6, 12))

    assert np.allclose(ray.direction, [1 / sqrt(2), 0.0, 1 / sqrt(2)], atol=1e-12)


def test_generate_ray_translation_moves_origin_only(intr: Intrinsics) -> None:
    pose = Pose(rotation=np.eye(3), translation=np.array([0.0, 0.0, -4.0]))

    moved = generate_ray(intr, pose, (2, 3))
    base = generate_ray(intr, identity_pose(), (2, 3))

    assert np.array_equal(moved.origin, [0.0, 0.0, -4.0])
    assert np.array_equal(moved.direction, base.direction)


@pytest.mark.parametrize("pixel", [(12, 0), (0, 16), (-1, 3)])
def test_generate_ray_out_of_bounds(intr: Intrinsics, pixel: tuple[int, int]) -> None:
    with pytest.raises(PixelOutOfBoundsError):
        generate_ray(intr, identity_pose(), pixel)


def test_generate_rays_matches_single_rays(
    intr: Intrinsics, rng: np.random.Generator
) -> None:
    pose = random_pose(rng)

    origins, directions = generate_rays(intr, pose)

    assert directions.shape == (intr.width * intr.height, 3)
    assert np.allclose(np.linalg.norm(directions, axis=1), 1.0, atol=1e-9)
    for row, col in [(0, 0), (5, 7), (11, 15)]:
        ray = generate_ray(intr, pose, (row, col))
        idx = row * intr.width + col
        assert np.allclose(directions[idx], ray.direction, atol=1e-12)
        assert np.array_equal(origins[idx], ray.origin)


def test_generate_rays_pixel_subset_out_of_bounds(intr: Intrinsics) -> None:
    with pytest.raises(PixelOutOfBoundsError):
        generate_rays(intr, identity_pose(), np.array([[0, 0], [12, 1]]))


def test_pose_from_look_at_forward_axis() -> None:
    pose = pose_from_look_at([0.0, 0.0, 0.0], [0.0, 0.0, 5.0])

    assert np.allclose(pose.rotation, np.eye(3))


def test_pose_from_look_at_points_camera_at_target() -> None:
    eye = np.array([1.0, -0.5, 0.5])
    target = np.array([0.0, 0.0, 4.0])

    pose = pose_from_look_at(eye, target)

    forward = (target - eye) / np.linalg.norm(target - eye)
    assert np.allclose(pose.rotation[:, 2], forward)
    assert np.isclose(np.linalg.det(pose.rotation), 1.0)
