"""
SE(3) Lie-group operations, trajectory interpolation and the pinhole camera model.

Poses map camera coordinates to world coordinates. Cameras look down +z with x to
the right and y pointing down the image. Pixel centres sit at integer + 0.5.
"""
import logging
from math import atan2, cos, pi, sin

import numpy as np
import numpy.typing as npt

from sci_radiance.exceptions import AngleNearPiError, PixelOutOfBoundsError
from sci_radiance.model import Intrinsics, Pose, Ray, Twist

logger = logging.getLogger(__name__)

SMALL_ANGLE = 1e-8
TAYLOR_ANGLE_LOG = 1e-4
PI_MARGIN = 1e-6


def skew(v: npt.ArrayLike) -> npt.NDArray:
    """Cross-product matrix [v]x such that skew(v) @ u == cross(v, u)"""
    x, y, z = np.asarray(v, dtype=np.float64)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def identity_pose() -> Pose:
    return Pose.identity()


def compose(a: Pose, b: Pose) -> Pose:
    """Return a * b"""
    return Pose(
        rotation=a.rotation @ b.rotation,
        translation=a.rotation @ b.translation + a.translation,
    )


def inverse(pose: Pose) -> Pose:
    rot_t = pose.rotation.T
    return Pose(rotation=rot_t.copy(), translation=-rot_t @ pose.translation)


def orthonormalize(rotation: npt.NDArray) -> npt.NDArray:
    """Project a 3x3 matrix onto SO(3) (closest rotation in Frobenius norm)"""
    u, _, vt = np.linalg.svd(rotation)
    if np.linalg.det(u @ vt) < 0:
        u[:, -1] *= -1
    return u @ vt


def _exp_coefficients(theta: float) -> tuple[float, float, float]:
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    t2 = theta * theta
    return (
        sin(theta) / theta,
        (1.0 - cos(theta)) / t2,
        (theta - sin(theta)) / (t2 * theta),
    )


def so3_exp(phi: npt.ArrayLike) -> npt.NDArray:
    phi = np.asarray(phi, dtype=np.float64)
    a, b, _ = _exp_coefficients(float(np.linalg.norm(phi)))
    k = skew(phi)
    return np.eye(3) + a * k + b * (k @ k)


def so3_log(rotation: npt.NDArray) -> npt.NDArray:
    """Rotation vector of a rotation matrix.

    :raises AngleNearPiError: If the rotation angle is within PI_MARGIN of pi
    """
    w = 0.5 * np.array(
        [
            rotation[2, 1] - rotation[1, 2],
            rotation[0, 2] - rotation[2, 0],
            rotation[1, 0] - rotation[0, 1],
        ]
    )
    sin_theta = float(np.linalg.norm(w))
    cos_theta = 0.5 * (float(np.trace(rotation)) - 1.0)
    theta = atan2(sin_theta, cos_theta)
    if theta >= pi - PI_MARGIN:
        raise AngleNearPiError(
            "Rotation angle %.9f is too close to pi for a unique logarithm" % theta
        )
    if theta < SMALL_ANGLE:
        factor = 1.0 + theta * theta / 6.0
    else:
        factor = theta / sin_theta
    return factor * w


def se3_exp(xi: Twist) -> Pose:
    """Closed-form exponential map of se(3)

    :param xi: Twist (rho, phi)

    :return: Pose with rotation exp([phi]x) and translation V(phi) @ rho
    """
    a, b, c = _exp_coefficients(float(np.linalg.norm(xi.phi)))
    k = skew(xi.phi)
    k2 = k @ k
    rotation = np.eye(3) + a * k + b * k2
    v = np.eye(3) + b * k + c * k2
    return Pose(rotation=rotation, translation=v @ xi.rho)


def se3_log(pose: Pose) -> Twist:
    """Logarithm map of SE(3), the inverse of se3_exp for angles below pi

    :raises AngleNearPiError: If the rotation angle is too close to pi
    """
    phi = so3_log(pose.rotation)
    theta = float(np.linalg.norm(phi))
    k = skew(phi)
    if theta < TAYLOR_ANGLE_LOG:
        d = 1.0 / 12.0 + theta * theta / 720.0
    else:
        a = sin(theta) / theta
        b = (1.0 - cos(theta)) / (theta * theta)
        d = (1.0 - a / (2.0 * b)) / (theta * theta)
    v_inv = np.eye(3) - 0.5 * k + d * (k @ k)
    return Twist(rho=v_inv @ pose.translation, phi=phi)


def interpolate_pose_at(start: Pose, end: Pose, fraction: float) -> Pose:
    """Pose at a fraction of the constant-velocity screw motion from start to end

    :raises AngleNearPiError: If the relative rotation is too close to pi
    """
    delta = se3_log(compose(inverse(start), end)).vector()
    return compose(start, se3_exp(Twist.from_vector(fraction * delta)))


def interpolation_fraction(i: int, n_frames: int, literal: bool = False) -> float:
    if n_frames < 1:
        raise ValueError("n_frames must be at least 1")
    if not 1 <= i <= n_frames:
        raise ValueError(f"Frame index must be in [1, {n_frames}]. Got {i}")
    if literal:
        return i / n_frames
    if n_frames == 1:
        return 0.0
    return (i - 1) / (n_frames - 1)


def interpolate_pose(
    start: Pose, end: Pose, i: int, n_frames: int, literal: bool = False
) -> Pose:
    """
    Camera pose of frame i (1-based) on a linear trajectory in SE(3). By default
    frame 1 sits at start and frame n_frames at end. With literal=True the fraction
    i / n_frames is used, which hits end at i = n_frames but not start at i = 1.

    :param start: Pose at the beginning of the exposure
    :param end: Pose at the end of the exposure
    :param i: Frame index, 1-based
    :param n_frames: Number of frames in the exposure
    :param literal: Use i / n_frames as interpolation fraction

    :raises AngleNearPiError: If the relative rotation is too close to pi
    :return: Interpolated pose
    """
    fraction = interpolation_fraction(i, n_frames, literal)
    if fraction == 0.0:
        return start.model_copy(deep=True)
    return interpolate_pose_at(start, end, fraction)


def pose_from_look_at(
    eye: npt.ArrayLike,
    target: npt.ArrayLike,
    down: npt.ArrayLike = (0.0, 1.0, 0.0),
) -> Pose:
    """Camera at eye looking at target with image rows increasing along down"""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    forward /= np.linalg.norm(forward)
    right = np.cross(np.asarray(down, dtype=np.float64), forward)
    right /= np.linalg.norm(right)
    image_down = np.cross(forward, right)
    return Pose(
        rotation=np.stack([right, image_down, forward], axis=1), translation=eye
    )


def pixel_grid(intr: Intrinsics) -> npt.NDArray:
    """All (row, col) pixels of an image in row-major order"""
    rows, cols = np.meshgrid(
        np.arange(intr.height), np.arange(intr.width), indexing="ij"
    )
    return np.stack([rows.ravel(), cols.ravel()], axis=1)


def camera_directions(intr: Intrinsics, pixels: npt.NDArray) -> npt.NDArray:
    """Unit ray directions in camera coordinates for (row, col) pixels"""
    pixels = np.asarray(pixels)
    dirs = np.stack(
        [
            (pixels[:, 1] + 0.5 - intr.cx) / intr.fx,
            (pixels[:, 0] + 0.5 - intr.cy) / intr.fy,
            np.ones(len(pixels)),
        ],
        axis=1,
    )
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def check_pixels(intr: Intrinsics, pixels: npt.NDArray) -> None:
    pixels = np.asarray(pixels)
    if pixels.size == 0:
        return
    if (
        pixels[:, 0].min() < 0
        or pixels[:, 1].min() < 0
        or pixels[:, 0].max() >= intr.height
        or pixels[:, 1].max() >= intr.width
    ):
        raise PixelOutOfBoundsError(
            "Pixels must lie inside a %sx%s image" % (intr.height, intr.width)
        )


def generate_rays(
    intr: Intrinsics, pose: Pose, pixels: None | npt.NDArray = None
) -> tuple[npt.NDArray, npt.NDArray]:
    """
    Vectorised ray generation.

    :param intr: Camera intrinsics
    :param pose: Camera-to-world pose
    :param pixels: Optional (M, 2) array of (row, col). Defaults to all pixels in
        row-major order

    :raises PixelOutOfBoundsError: If a pixel is outside the image
    :return: Origins and unit directions, both (M, 3)
    """
    if pixels is None:
        pixels = pixel_grid(intr)
    else:
        check_pixels(intr, pixels)
    directions = camera_directions(intr, pixels) @ pose.rotation.T
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    origins = np.broadcast_to(pose.translation, directions.shape).copy()
    return origins, directions


def generate_ray(intr: Intrinsics, pose: Pose, pixel: tuple[int, int]) -> Ray:
    """
    Ray through the centre of a pixel.

    :param intr: Camera intrinsics
    :param pose: Camera-to-world pose
    :param pixel: (row, col)

    :raises PixelOutOfBoundsError: If the pixel is outside the image
    :return: Ray with origin at the camera centre
    """
    row, col = pixel
    if not (0 <= row < intr.height and 0 <= col < intr.width):
        raise PixelOutOfBoundsError(
            "Pixel %s outside of %sx%s image" % (pixel, intr.height, intr.width)
        )
    cam = np.array(
        [(col + 0.5 - intr.cx) / intr.fx, (row + 0.5 - intr.cy) / intr.fy, 1.0]
    )
    direction = pose.rotation @ cam
    return Ray(
        origin=pose.translation.copy(),
        direction=direction / np.linalg.norm(direction),
        pixel=(int(row), int(col)),
    )
