import logging
from math import degrees, inf, log10

import numpy as np
import numpy.typing as npt
import pandas as pd
from scipy.ndimage import gaussian_filter

from sci_radiance.exceptions import (
    AngleNearPiError,
    DimensionMismatchError,
    ImageTooSmallError,
)
from sci_radiance.geometry import compose, inverse, so3_log
from sci_radiance.model import ImagePair, Pose, TrajectoryError

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 1.0

METRIC_COLUMNS = ["frame_index", "psnr_db", "ssim"]


def psnr(pair: ImagePair) -> float:
    """
    Peak signal-to-noise ratio in dB for images in [0, 1].

    :return: 10 * log10(1 / MSE) or math.inf for identical images
    """
    mse = float(np.mean((pair.reference - pair.candidate) ** 2))
    if mse == 0:
        return inf
    return 10 * log10(DYNAMIC_RANGE**2 / mse)


def _blur(image: npt.NDArray) -> npt.NDArray:
    radius = SSIM_WINDOW // 2
    filtered = gaussian_filter(image, SSIM_SIGMA, truncate=radius / SSIM_SIGMA)
    return filtered[radius:-radius, radius:-radius]


def ssim(pair: ImagePair) -> float:
    """
    Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
    K2 = 0.03 and dynamic range 1. The SSIM map is evaluated where the window fits
    inside the image and averaged over windows and channels.

    :raises ImageTooSmallError: If height or width is below 11 pixels
    """
    ref, cand = pair.reference, pair.candidate
    if min(ref.shape[0], ref.shape[1]) < SSIM_WINDOW:
        raise ImageTooSmallError(
            f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels. Got {ref.shape}"
        )
    if ref.ndim == 2:
        ref, cand = ref[..., None], cand[..., None]

    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    scores = []
    for ch in range(ref.shape[2]):
        x, y = ref[..., ch], cand[..., ch]
        mu_x, mu_y = _blur(x), _blur(y)
        var_x = _blur(x * x) - mu_x**2
        var_y = _blur(y * y) - mu_y**2
        cov = _blur(x * y) - mu_x * mu_y
        ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
            (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        )
        scores.append(ssim_map.mean())
    return float(np.mean(scores))


def evaluate_frames(reference: npt.NDArray, candidate: npt.NDArray) -> pd.DataFrame:
    """
    Per-frame PSNR and SSIM of two frame stacks plus their mean.

    :param reference: (N, H, W[, C]) ground truth frames
    :param candidate: Frames under evaluation with the same shape

    :raises DimensionMismatchError: If the stacks differ in shape
    :return: DataFrame with columns frame_index (1-based, "mean" in the last row),
        psnr_db and ssim
    """
    reference = np.asarray(reference, dtype=np.float64)
    candidate = np.asarray(candidate, dtype=np.float64)
    if reference.shape != candidate.shape:
        raise DimensionMismatchError(
            f"Frame stacks differ: {reference.shape} vs {candidate.shape}"
        )
    if reference.ndim not in (3, 4):
        raise DimensionMismatchError("Frame stacks must be (N, H, W) or (N, H, W, C)")

    rows: list[dict] = []
    for i, (ref, cand) in enumerate(zip(reference, candidate), start=1):
        pair = ImagePair(reference=ref, candidate=cand)
        rows.append(dict(frame_index=str(i), psnr_db=psnr(pair), ssim=ssim(pair)))

    data = pd.DataFrame(rows, columns=METRIC_COLUMNS)
    mean_row = pd.DataFrame(
        [
            dict(
                frame_index="mean",
                psnr_db=data["psnr_db"].mean(),
                ssim=data["ssim"].mean(),
            )
        ],
        columns=METRIC_COLUMNS,
    )
    logger.debug("Evaluated %s frames", len(data))
    return pd.concat([data, mean_row], ignore_index=True)


def trajectory_error(
    rec_start: Pose, rec_end: Pose, gt_start: Pose, gt_end: Pose
) -> TrajectoryError:
    """
    Compare a recovered trajectory with the ground truth. The rigid transform
    mapping the recovered start onto the true start is applied to the recovered
    end before the comparison (no scale).
    """
    alignment = compose(gt_start, inverse(rec_start))
    aligned_end = compose(alignment, rec_end)
    translation_error = float(
        np.linalg.norm(aligned_end.translation - gt_end.translation)
    )
    relative = compose(inverse(gt_end), aligned_end)
    try:
        rotation_error = degrees(float(np.linalg.norm(so3_log(relative.rotation))))
    except AngleNearPiError:
        rotation_error = 180.0
    length = float(np.linalg.norm(gt_end.translation - gt_start.translation))
    return TrajectoryError(
        translation_error=translation_error,
        rotation_error_degrees=rotation_error,
        relative_error=translation_error / length if length > 0 else inf,
    )
