"""
Software model of the snapshot compressive imager: binary masks, formation of the
compressed measurement and the measurement-domain loss.
"""
import logging
from math import isclose
from typing import Literal

import numpy as np
import numpy.typing as npt

from sci_radiance.exceptions import (
    DimensionMismatchError,
    NonIntegerOnesCountError,
    PixelOutOfBoundsError,
)
from sci_radiance.model import MaskStack, Measurement

logger = logging.getLogger(__name__)


def ones_per_pixel(n_frames: int, overlap_rate: float) -> int:
    """
    Number of open masks per pixel for a given overlapping rate.

    :raises NonIntegerOnesCountError: If overlap_rate * n_frames is not a positive
        integer
    """
    ones = overlap_rate * n_frames
    k = round(ones)
    if k < 1 or not isclose(ones, k, abs_tol=1e-9):
        raise NonIntegerOnesCountError(
            "overlap rate %s with %s frames gives %s ones per pixel"
            % (overlap_rate, n_frames, ones)
        )
    return k


def generate_masks(
    height: int,
    width: int,
    n_frames: int,
    overlap_rate: float,
    seed: int,
    mode: Literal["exact", "bernoulli"] = "exact",
) -> MaskStack:
    """
    Generate N binary masks.

    In exact mode every pixel has exactly overlap_rate * n_frames open masks. The
    open frames are chosen uniformly at random per pixel and independently across
    pixels. In bernoulli mode each entry is open with probability overlap_rate.

    :param height: Image height
    :param width: Image width
    :param n_frames: Compression ratio N
    :param overlap_rate: Overlapping rate in (0, 1]
    :param seed: Seed of the generator
    :param mode: "exact" or "bernoulli"

    :raises NonIntegerOnesCountError: In exact mode if overlap_rate * n_frames is
        not a positive integer
    :return: MaskStack with masks of shape (N, H, W)
    """
    rng = np.random.default_rng(seed)
    if mode == "exact":
        k = ones_per_pixel(n_frames, overlap_rate)
        keys = rng.random((height * width, n_frames))
        ranks = np.argsort(np.argsort(keys, axis=1), axis=1)
        masks = (ranks < k).astype(np.uint8)
    elif mode == "bernoulli":
        if not 0 < overlap_rate <= 1:
            raise NonIntegerOnesCountError("overlap rate must lie in (0, 1]")
        masks = (rng.random((height * width, n_frames)) < overlap_rate).astype(
            np.uint8
        )
    else:
        raise ValueError(f"Unknown mask mode {mode}")

    logger.debug(
        "Generated %s masks of %sx%s with overlap rate %s (%s)",
        n_frames,
        height,
        width,
        overlap_rate,
        mode,
    )
    return MaskStack(
        masks=np.ascontiguousarray(masks.T.reshape(n_frames, height, width)),
        seed=seed,
        target_or=overlap_rate,
    )


def overlapping_rate_map(stack: MaskStack) -> npt.NDArray:
    """Per-pixel fraction of open masks, shape (H, W)"""
    return stack.masks.sum(axis=0) / stack.n_frames


def overlapping_rate(stack: MaskStack, pixel: tuple[int, int]) -> float:
    """
    Fraction of the N masks that are open at a pixel.

    :param stack: Mask stack
    :param pixel: (row, col)

    :raises PixelOutOfBoundsError: If the pixel is outside the masks
    """
    row, col = pixel
    if not (0 <= row < stack.height and 0 <= col < stack.width):
        raise PixelOutOfBoundsError(
            "Pixel %s outside of %sx%s masks" % (pixel, stack.height, stack.width)
        )
    return float(stack.masks[:, row, col].sum()) / stack.n_frames


def _frames_as_nhwc(frames: npt.NDArray) -> npt.NDArray:
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 3:
        return frames[..., None]
    if frames.ndim != 4 or frames.shape[3] not in (1, 3):
        raise DimensionMismatchError(
            f"Frames must be (N, H, W) or (N, H, W, C). Got {frames.shape}"
        )
    return frames


def _check_frames(frames: npt.NDArray, stack: MaskStack) -> None:
    if frames.shape[:3] != stack.masks.shape:
        raise DimensionMismatchError(
            f"Frames {frames.shape[:3]} do not match masks {stack.masks.shape}"
        )


def forward_operator(frames: npt.NDArray, masks: npt.NDArray) -> npt.NDArray:
    """A(x): sum of masked frames. frames (N, H, W, C), masks (N, H, W)"""
    return (frames * masks[..., None]).sum(axis=0)


def adjoint_operator(measurement: npt.NDArray, masks: npt.NDArray) -> npt.NDArray:
    """A^T(y): the measurement gated by every mask, shape (N, H, W, C)"""
    return masks[..., None] * measurement[None]


def encode_measurement(
    frames: npt.NDArray,
    stack: MaskStack,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> Measurement:
    """
    Form the compressed measurement Y = sum_i X_i * M_i + Z. The same mask gates
    every colour channel and Z is Gaussian noise clamped so that Y >= 0.

    :param frames: (N, H, W, 3) colour or (N, H, W) grayscale frames in [0, 1]
    :param stack: Masks matching the frames
    :param noise_sigma: Standard deviation of Z
    :param seed: Seed of the noise generator

    :raises DimensionMismatchError: If frames and masks disagree
    :return: Measurement with pixels (H, W, C)
    """
    frames = _frames_as_nhwc(frames)
    _check_frames(frames, stack)
    pixels = forward_operator(frames, stack.masks.astype(np.float64))
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        pixels = np.maximum(pixels + rng.normal(0.0, noise_sigma, pixels.shape), 0.0)
    return Measurement(pixels=pixels.astype(np.float32), noise_sigma=noise_sigma)


def sci_loss(
    rendered: npt.NDArray,
    stack: MaskStack,
    measurement: Measurement,
    pixels: npt.NDArray,
    normalize: bool = False,
) -> tuple[float, npt.NDArray]:
    """
    Squared error between the measurement and the masked sum of rendered values
    for a batch of measurement pixels.

    :param rendered: (R, N, C) rendered values C(r, i). Entries of masked-out
        frames are ignored
    :param stack: Mask stack of the measurement
    :param measurement: Compressed measurement
    :param pixels: (R, 2) integer (row, col) of every ray
    :param normalize: Divide measurement and masked sum by the per-pixel count of
        open masks

    :raises DimensionMismatchError: If shapes of rendered values, pixels, masks or
        measurement disagree
    :return: Loss summed over rays and channels and dL/dC with the shape of rendered
    """
    rendered = np.asarray(rendered, dtype=np.float64)
    pixels = np.asarray(pixels)
    if rendered.ndim != 3 or rendered.shape[0] != len(pixels):
        raise DimensionMismatchError("rendered must have shape (R, N, C)")
    if rendered.shape[1] != stack.n_frames:
        raise DimensionMismatchError(
            f"Expected {stack.n_frames} rendered frames. Got {rendered.shape[1]}"
        )
    if rendered.shape[2] != measurement.channels:
        raise DimensionMismatchError(
            f"Rendered values have {rendered.shape[2]} channels, measurement has "
            f"{measurement.channels}"
        )
    if (measurement.height, measurement.width) != (stack.height, stack.width):
        raise DimensionMismatchError("Measurement and masks differ in size")

    rows, cols = pixels[:, 0], pixels[:, 1]
    masks = stack.masks[:, rows, cols].T.astype(np.float64)
    target = measurement.pixels[rows, cols].astype(np.float64)
    gated = masks[..., None] * rendered
    predicted = gated.sum(axis=1)
    if normalize:
        counts = np.maximum(masks.sum(axis=1), 1.0)[:, None]
        predicted = predicted / counts
        target = target / counts
    else:
        counts = np.ones((len(pixels), 1))

    residual = target - predicted
    loss = float((residual**2).sum())
    grad = -2.0 * masks[..., None] * (residual / counts)[:, None, :]
    return loss, grad
