"""
Joint optimisation of a radiance grid and a linear camera trajectory against a
single compressed measurement.
"""
import logging
from pathlib import Path
from typing import Callable, NamedTuple, Optional

import numpy as np
import numpy.typing as npt
import pandas as pd

from sci_radiance.exceptions import DimensionMismatchError, ShapeMismatchError
from sci_radiance.field import (
    backward_from_cache,
    density_tv,
    init_grid,
    render_frame,
    render_rays,
    stratified_jitter,
)
from sci_radiance.geometry import (
    compose,
    generate_rays,
    interpolate_pose,
    inverse,
    orthonormalize,
    se3_exp,
    se3_log,
)
from sci_radiance.model import (
    AdamState,
    Intrinsics,
    MaskStack,
    Measurement,
    Pose,
    RadianceGrid,
    SamplingConfig,
    TrainConfig,
    TrajectoryParams,
    Twist,
)
from sci_radiance.sci import sci_loss
from sci_radiance.utils.fileio import (
    read_grid,
    read_optimizer_state,
    read_poses,
    write_grid,
    write_optimizer_state,
    write_poses,
)

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["iter", "loss", "lr_scene", "lr_pose"]
JACOBIAN_STEP = 1e-6

GRID_FILE = "grid.scgr"
POSES_FILE = "poses.txt"
OPTIMIZER_FILE = "optimizer.npz"


class LossAndGradients(NamedTuple):
    loss: float
    density: npt.NDArray
    sh_coeffs: npt.NDArray
    trajectory: npt.NDArray


class TrainResult(NamedTuple):
    grid: RadianceGrid
    trajectory: TrajectoryParams
    history: pd.DataFrame
    scene_state: AdamState
    pose_state: AdamState


def init_trajectory(cfg: TrainConfig) -> TrajectoryParams:
    """
    Endpoint twists with zero rotation and Gaussian translation perturbations
    (standard deviation pose_init_trans_sigma per axis, seeded by cfg.seed).
    """
    rng = np.random.default_rng(cfg.seed)
    rho = rng.normal(0.0, 1.0, (2, 3)) * cfg.pose_init_trans_sigma
    return TrajectoryParams(
        twist_start=Twist(rho=rho[0], phi=np.zeros(3)),
        twist_end=Twist(rho=rho[1], phi=np.zeros(3)),
    )


def trajectory_from_poses(start: Pose, end: Pose) -> TrajectoryParams:
    """Twists reproducing two known endpoint poses"""
    return TrajectoryParams(twist_start=se3_log(start), twist_end=se3_log(end))


def trajectory_endpoints(trajectory: TrajectoryParams) -> tuple[Pose, Pose]:
    return se3_exp(trajectory.twist_start), se3_exp(trajectory.twist_end)


def trajectory_poses(
    trajectory: TrajectoryParams, n_frames: int, literal: bool = False
) -> list[Pose]:
    """Camera pose of every frame of the exposure (index 0 is frame 1)"""
    start, end = trajectory_endpoints(trajectory)
    poses = []
    for i in range(1, n_frames + 1):
        pose = interpolate_pose(start, end, i, n_frames, literal)
        poses.append(
            Pose(rotation=orthonormalize(pose.rotation), translation=pose.translation)
        )
    return poses


def pose_twist_jacobian(
    trajectory: TrajectoryParams, n_frames: int, literal: bool = False
) -> npt.NDArray:
    """
    Derivative of the left perturbation of every frame pose with respect to the 12
    trajectory parameters, evaluated by central differences of the trajectory map.

    :return: (n_frames, 6, 12) array J with xi_i = J[i] @ d_theta
    """
    theta = trajectory.vector()
    base = trajectory_poses(trajectory, n_frames, literal)
    base_inv = [inverse(pose) for pose in base]
    jacobian = np.zeros((n_frames, 6, 12))
    for k in range(12):
        step = np.zeros(12)
        step[k] = JACOBIAN_STEP
        plus = trajectory_poses(
            TrajectoryParams.from_vector(theta + step), n_frames, literal
        )
        minus = trajectory_poses(
            TrajectoryParams.from_vector(theta - step), n_frames, literal
        )
        for i in range(n_frames):
            xi_plus = se3_log(compose(plus[i], base_inv[i])).vector()
            xi_minus = se3_log(compose(minus[i], base_inv[i])).vector()
            jacobian[i, :, k] = (xi_plus - xi_minus) / (2 * JACOBIAN_STEP)
    return jacobian


def lr_schedule(start: float, end: float, iteration: int, total_iters: int) -> float:
    """Exponential decay from start (iteration 0) to end (iteration total_iters)"""
    if not 0 <= iteration <= max(total_iters, 0):
        raise ValueError(f"iteration {iteration} outside [0, {total_iters}]")
    if total_iters == 0:
        return start
    return start * (end / start) ** (iteration / total_iters)


def adam_step(
    params: dict[str, npt.NDArray],
    grads: dict[str, npt.NDArray],
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> tuple[dict[str, npt.NDArray], AdamState]:
    """
    One bias corrected Adam update.

    :param params: Named parameter arrays
    :param grads: Gradients with the same names and shapes
    :param state: Optimiser state, updated in place
    :param lr: Learning rate
    :param betas: Decay of the first and second moment
    :param eps: Denominator offset

    :raises ShapeMismatchError: If names or shapes of params and grads differ
    :return: Updated parameters and the state
    """
    if set(params) != set(grads):
        raise ShapeMismatchError(
            f"Parameters {sorted(params)} and gradients {sorted(grads)} differ"
        )
    for name, value in params.items():
        if np.shape(value) != np.shape(grads[name]):
            raise ShapeMismatchError(
                f"{name}: parameter shape {np.shape(value)} != gradient shape "
                f"{np.shape(grads[name])}"
            )
        if name in state.first_moment and state.first_moment[name].shape != np.shape(
            value
        ):
            raise ShapeMismatchError(f"{name}: optimiser state has another shape")

    beta1, beta2 = betas
    state.step += 1
    correction1 = 1 - beta1**state.step
    correction2 = 1 - beta2**state.step
    updated = {}
    for name, value in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        m = state.first_moment.get(name, np.zeros_like(grad))
        v = state.second_moment.get(name, np.zeros_like(grad))
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v
        updated[name] = value - lr * (m / correction1) / (
            np.sqrt(v / correction2) + eps
        )
    return updated, state


def loss_and_gradients(
    grid: RadianceGrid,
    trajectory: TrajectoryParams,
    measurement: Measurement,
    stack: MaskStack,
    intr: Intrinsics,
    cfg: TrainConfig,
    pixels: npt.NDArray,
    rng: Optional[np.random.Generator] = None,
) -> LossAndGradients:
    """
    Batch mean of the measurement loss and its gradients with respect to the grid
    and the 12 trajectory parameters. Only (pixel, frame) pairs with an open mask
    are rendered.

    :param grid: Current grid
    :param trajectory: Current trajectory
    :param measurement: Compressed measurement
    :param stack: Masks of the measurement
    :param intr: Camera intrinsics
    :param cfg: Training configuration
    :param pixels: (R, 2) sampled (row, col)
    :param rng: Generator for stratified jitter. Bin centres are used if None

    :return: LossAndGradients
    """
    n_frames = stack.n_frames
    n_rays = len(pixels)
    poses = trajectory_poses(trajectory, n_frames, cfg.literal_interpolation)
    open_masks = stack.masks[:, pixels[:, 0], pixels[:, 1]].T

    # pairs sorted by frame so rays of one pose are contiguous
    frame_idx, ray_idx = np.nonzero(open_masks.T)
    origins = np.zeros((len(ray_idx), 3))
    directions = np.zeros((len(ray_idx), 3))
    frame_slices = []
    for i, pose in enumerate(poses):
        sel = np.flatnonzero(frame_idx == i)
        frame_slices.append(sel)
        if len(sel):
            origins[sel], directions[sel] = generate_rays(
                intr, pose, pixels[ray_idx[sel]]
            )

    jitter = (
        None if rng is None else stratified_jitter(len(ray_idx), cfg.sampling, rng)
    )
    result = render_rays(
        grid,
        origins,
        directions,
        cfg.sampling,
        jitter,
        keep_cache=True,
        chunk_size=cfg.chunk_size,
        n_workers=cfg.n_workers,
    )

    rendered = np.zeros((n_rays, n_frames, 3))
    rendered[ray_idx, frame_idx] = result.colors
    grayscale = measurement.channels == 1
    if grayscale:
        rendered = rendered.mean(axis=2, keepdims=True)
    loss, d_rendered = sci_loss(
        rendered, stack, measurement, pixels, normalize=cfg.normalize_loss
    )
    loss /= n_rays
    d_rendered /= n_rays

    upstream = d_rendered[ray_idx, frame_idx]
    if grayscale:
        upstream = np.repeat(upstream / 3.0, 3, axis=1)
    grads = backward_from_cache(
        grid, result, upstream, cfg.deterministic, cfg.n_workers
    )

    d_density = grads.density
    if cfg.use_tv and cfg.tv_weight > 0:
        tv, tv_grad = density_tv(grid.density)
        loss += cfg.tv_weight * tv
        d_density = d_density + cfg.tv_weight * tv_grad

    d_trajectory = np.zeros(12)
    if cfg.optimize_poses and len(ray_idx):
        jacobian = pose_twist_jacobian(trajectory, n_frames, cfg.literal_interpolation)
        for i, sel in enumerate(frame_slices):
            if not len(sel):
                continue
            g_origin = grads.origins[sel]
            g_direction = grads.directions[sel]
            d_xi = np.concatenate(
                [
                    g_origin.sum(axis=0),
                    (
                        np.cross(origins[sel], g_origin)
                        + np.cross(directions[sel], g_direction)
                    ).sum(axis=0),
                ]
            )
            d_trajectory += jacobian[i].T @ d_xi

    return LossAndGradients(
        loss=float(loss),
        density=d_density,
        sh_coeffs=grads.sh_coeffs,
        trajectory=d_trajectory,
    )


def _check_inputs(
    measurement: Measurement, stack: MaskStack, intr: Intrinsics
) -> None:
    if (measurement.height, measurement.width) != (stack.height, stack.width):
        raise DimensionMismatchError("Measurement and masks differ in size")
    if (intr.height, intr.width) != (stack.height, stack.width):
        raise DimensionMismatchError("Camera resolution differs from the masks")


def train(
    measurement: Measurement,
    stack: MaskStack,
    intr: Intrinsics,
    cfg: TrainConfig,
    trajectory: Optional[TrajectoryParams] = None,
    grid: Optional[RadianceGrid] = None,
    callback: Optional[Callable[[int, float], None]] = None,
) -> TrainResult:
    """
    Jointly optimise the grid and the trajectory endpoints.

    Every iteration samples batch_rays measurement pixels uniformly with
    replacement, renders each pixel in every frame whose mask is open, evaluates
    the measurement loss, back-propagates through rendering and the trajectory and
    applies one Adam step to the scene and (if enabled) one to the trajectory.

    :param measurement: Compressed measurement
    :param stack: Masks of the measurement
    :param intr: Camera intrinsics
    :param cfg: Training configuration
    :param trajectory: Initial trajectory. Defaults to init_trajectory(cfg)
    :param grid: Initial grid. Defaults to a uniform grid from cfg
    :param callback: Called with (iteration, loss) after every step

    :raises DimensionMismatchError: If measurement, masks and camera disagree
    :return: TrainResult with grid, trajectory, loss history and optimiser states
    """
    _check_inputs(measurement, stack, intr)
    if grid is None:
        grid = init_grid(
            cfg.grid_resolution, cfg.bbox_min, cfg.bbox_max, sh_degree=cfg.sh_degree
        )
    if trajectory is None:
        trajectory = init_trajectory(cfg)

    rng = np.random.default_rng(cfg.seed)
    scene_state = AdamState()
    pose_state = AdamState()
    betas = (cfg.adam_beta1, cfg.adam_beta2)
    records = []

    logger.info(
        "Training %s iterations on %s frames of %sx%s",
        cfg.iterations,
        stack.n_frames,
        stack.height,
        stack.width,
    )
    for it in range(cfg.iterations):
        lr_scene = lr_schedule(
            cfg.lr_scene_start, cfg.lr_scene_end, it, cfg.iterations
        )
        lr_pose = lr_schedule(cfg.lr_pose_start, cfg.lr_pose_end, it, cfg.iterations)
        pixels = np.stack(
            [
                rng.integers(0, stack.height, cfg.batch_rays),
                rng.integers(0, stack.width, cfg.batch_rays),
            ],
            axis=1,
        )
        step = loss_and_gradients(
            grid,
            trajectory,
            measurement,
            stack,
            intr,
            cfg,
            pixels,
            rng if cfg.sampling.stratified else None,
        )

        params, scene_state = adam_step(
            {"density": grid.density, "sh_coeffs": grid.sh_coeffs},
            {"density": step.density, "sh_coeffs": step.sh_coeffs},
            scene_state,
            lr_scene,
            betas,
            cfg.adam_eps,
        )
        grid = grid.model_copy(update=params)

        if cfg.optimize_poses:
            updated, pose_state = adam_step(
                {"trajectory": trajectory.vector()},
                {"trajectory": step.trajectory},
                pose_state,
                lr_pose,
                betas,
                cfg.adam_eps,
            )
            trajectory = TrajectoryParams.from_vector(updated["trajectory"])

        records.append((it, step.loss, lr_scene, lr_pose))
        if it % cfg.log_every == 0 or it == cfg.iterations - 1:
            logger.info(
                "iter %s: loss %.6g (lr %.3g / %.3g)", it, step.loss, lr_scene, lr_pose
            )
        if callback is not None:
            callback(it, step.loss)

    history = pd.DataFrame(records, columns=HISTORY_COLUMNS)
    return TrainResult(
        grid=grid,
        trajectory=trajectory,
        history=history,
        scene_state=scene_state,
        pose_state=pose_state,
    )


def evaluation_sampling(cfg: SamplingConfig) -> SamplingConfig:
    """Sampling used for evaluation renders (bin centres, no jitter)"""
    return cfg.model_copy(update={"stratified": False})


def reconstruct_frames(
    grid: RadianceGrid,
    trajectory: TrajectoryParams,
    intr: Intrinsics,
    n_frames: int,
    cfg: SamplingConfig,
    literal: bool = False,
    chunk_size: int = 1024,
    n_workers: int = 1,
) -> npt.NDArray:
    """Render the N frames of the recovered trajectory, shape (N, H, W, 3)"""
    sampling = evaluation_sampling(cfg)
    return np.stack(
        [
            render_frame(
                grid, pose, intr, sampling, chunk_size=chunk_size, n_workers=n_workers
            )
            for pose in trajectory_poses(trajectory, n_frames, literal)
        ]
    )


def save_checkpoint(
    directory: Path | str,
    grid: RadianceGrid,
    trajectory: TrajectoryParams,
    n_frames: int,
    scene_state: AdamState,
    pose_state: AdamState,
    literal: bool = False,
) -> Path:
    """
    Write grid file, pose text file (start, end, then the N frame poses) and the
    optimiser state into directory.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    start, end = trajectory_endpoints(trajectory)
    write_grid(directory / GRID_FILE, grid)
    write_poses(
        directory / POSES_FILE,
        [start, end, *trajectory_poses(trajectory, n_frames, literal)],
    )
    write_optimizer_state(directory / OPTIMIZER_FILE, scene_state, pose_state)
    logger.info("Checkpoint written to %s", directory)
    return directory


def load_checkpoint(
    directory: Path | str,
) -> tuple[RadianceGrid, TrajectoryParams, list[Pose], AdamState, AdamState]:
    """
    Read a checkpoint written by save_checkpoint.

    :return: Grid, trajectory, frame poses and the two optimiser states
    """
    directory = Path(directory)
    grid = read_grid(directory / GRID_FILE)
    poses = read_poses(directory / POSES_FILE)
    if len(poses) < 2:
        raise DimensionMismatchError(f"{directory / POSES_FILE} lacks endpoint poses")
    trajectory = trajectory_from_poses(poses[0], poses[1])
    scene_state, pose_state = read_optimizer_state(directory / OPTIMIZER_FILE)
    return grid, trajectory, poses[2:], scene_state, pose_state
