"""
Procedural toy scenes, ground-truth grids and synthetic snapshot datasets.
"""
import logging
from pathlib import Path
from typing import Literal, NamedTuple, Optional

import numpy as np
import numpy.typing as npt

from sci_radiance.field import EMPTY_RAW_DENSITY, inverse_softplus, render_frame
from sci_radiance.geometry import (
    generate_rays,
    interpolate_pose,
    interpolate_pose_at,
    interpolation_fraction,
    so3_exp,
)
from sci_radiance.model import (
    CameraConfig,
    DatasetConfig,
    Intrinsics,
    MaskStack,
    Measurement,
    Pose,
    Primitive,
    RadianceGrid,
    SamplingConfig,
    ToyScene,
    Vector3,
)
from sci_radiance.sci import encode_measurement, generate_masks
from sci_radiance.utils.fileio import (
    read_masks,
    read_measurement,
    read_poses,
    read_tensor,
    write_grid,
    write_masks,
    write_measurement,
    write_poses,
    write_tensor,
)
from sci_radiance.utils.sh import SH_C0

logger = logging.getLogger(__name__)

MIN_BAKE_RESOLUTION = 8

MASKS_FILE = "masks.scmk"
MEASUREMENT_FILE = "measurement.scms"
FRAMES_FILE = "frames.sctf"
POSES_FILE = "poses.txt"
GRID_FILE = "gt_grid.scgr"
NOVEL_FRAMES_FILE = "novel_frames.sctf"


class Dataset(NamedTuple):
    measurement: Measurement
    stack: MaskStack
    frames: npt.NDArray
    poses: list[Pose]
    start: Pose
    end: Pose
    novel_frames: Optional[npt.NDArray] = None
    """Frames at novel_view_poses, None for single-frame datasets"""


def _box(
    center: Vector3,
    half: Vector3,
    albedo: Vector3,
    density: float = 25.0,
    texture: Literal["flat", "checker"] = "checker",
    scale: float = 0.2,
) -> Primitive:
    return Primitive(
        shape="box",
        center=center,
        size=half,
        albedo=albedo,
        density=density,
        texture=texture,
        texture_scale=scale,
    )


def _sphere(
    center: Vector3, radius: float, albedo: Vector3, density: float = 25.0
) -> Primitive:
    return Primitive(
        shape="sphere",
        center=center,
        size=(radius, radius, radius),
        albedo=albedo,
        density=density,
    )


def preset_scene(name: str) -> ToyScene:
    """
    Shipped toy scenes with textured boxes at increasing clutter.

    :param name: "sparse", "cluster" or "clutter"
    """
    if name == "sparse":
        primitives = [
            _box((-0.5, 0.0, 4.0), (0.4, 0.4, 0.4), (0.9, 0.3, 0.2)),
            _sphere((0.6, 0.1, 4.2), 0.35, (0.2, 0.5, 0.9)),
        ]
    elif name == "cluster":
        primitives = [
            _box((-0.45, -0.4, 4.0), (0.3, 0.3, 0.3), (0.9, 0.3, 0.2)),
            _box((0.4, -0.35, 4.3), (0.3, 0.25, 0.3), (0.2, 0.8, 0.3)),
            _box((-0.3, 0.45, 4.4), (0.35, 0.25, 0.3), (0.95, 0.85, 0.2), scale=0.15),
            _box((0.45, 0.45, 3.9), (0.25, 0.3, 0.25), (0.3, 0.4, 0.95), scale=0.15),
            _sphere((0.0, 0.0, 3.5), 0.25, (0.9, 0.9, 0.9)),
        ]
    elif name == "clutter":
        primitives = [
            _box((0.0, 0.0, 5.0), (1.3, 1.3, 0.2), (0.6, 0.6, 0.6), scale=0.3),
            _box((-0.8, -0.8, 4.0), (0.25, 0.25, 0.25), (0.9, 0.3, 0.2)),
            _box((0.0, -0.8, 3.6), (0.25, 0.2, 0.25), (0.2, 0.8, 0.3), scale=0.1),
            _box((0.8, -0.7, 4.2), (0.2, 0.3, 0.2), (0.3, 0.4, 0.95)),
            _box((-0.8, 0.1, 3.4), (0.2, 0.25, 0.2), (0.95, 0.85, 0.2), scale=0.1),
            _box((0.75, 0.15, 3.8), (0.3, 0.2, 0.3), (0.8, 0.2, 0.8), scale=0.15),
            _box((-0.4, 0.8, 4.3), (0.3, 0.25, 0.25), (0.2, 0.8, 0.8)),
            _box((0.5, 0.85, 3.5), (0.25, 0.2, 0.25), (0.95, 0.55, 0.1), scale=0.1),
            _sphere((0.0, 0.1, 4.1), 0.3, (0.9, 0.9, 0.9)),
            _sphere((-0.15, -0.2, 3.0), 0.15, (0.1, 0.3, 0.6)),
        ]
    else:
        raise ValueError(f"Unknown scene preset {name}")
    return ToyScene(primitives=primitives)


def _inside(primitive: Primitive, points: npt.NDArray) -> npt.NDArray:
    rel = (points - np.array(primitive.center)) / np.array(primitive.size)
    if primitive.shape == "sphere":
        return (rel**2).sum(axis=1) <= 1.0
    return np.all(np.abs(rel) <= 1.0, axis=1)


def _albedo(primitive: Primitive, points: npt.NDArray) -> npt.NDArray:
    albedo = np.broadcast_to(np.array(primitive.albedo), (len(points), 3))
    if primitive.texture == "flat":
        return albedo
    cells = np.floor(
        (points - np.array(primitive.center)) / primitive.texture_scale
    ).astype(np.int64)
    dark = (cells.sum(axis=1) % 2).astype(bool)
    return np.where(dark[:, None], 0.5 * albedo, albedo)


def scene_density_albedo(
    scene: ToyScene, points: npt.NDArray
) -> tuple[npt.NDArray, npt.NDArray]:
    """
    Analytic density and albedo of a scene. Later primitives overwrite earlier ones.

    :param scene: Toy scene
    :param points: (M, 3) positions

    :return: Density (M,) and albedo (M, 3)
    """
    points = np.asarray(points, dtype=np.float64)
    density = np.zeros(len(points))
    albedo = np.zeros((len(points), 3))
    for primitive in scene.primitives:
        inside = _inside(primitive, points)
        if not inside.any():
            continue
        density[inside] = primitive.density
        albedo[inside] = _albedo(primitive, points[inside])
    return density, albedo


def voxel_centers(
    bbox_min: npt.ArrayLike, bbox_max: npt.ArrayLike, resolution: int
) -> npt.NDArray:
    """Centres of a resolution^3 grid as (n, n, n, 3), indexed [x, y, z]"""
    lo = np.asarray(bbox_min, dtype=np.float64)
    hi = np.asarray(bbox_max, dtype=np.float64)
    axes = [
        lo[a] + (np.arange(resolution) + 0.5) * (hi[a] - lo[a]) / resolution
        for a in range(3)
    ]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def bake_scene(scene: ToyScene, resolution: int) -> RadianceGrid:
    """
    Sample the analytic scene at voxel centres into a degree-0 grid. Empty voxels get
    a raw density of EMPTY_RAW_DENSITY, the albedo becomes the DC coefficient.

    :param scene: Toy scene
    :param resolution: Voxels per axis, at least 8

    :return: RadianceGrid with sh_degree 0
    """
    if resolution < MIN_BAKE_RESOLUTION:
        raise ValueError(f"Resolution must be at least {MIN_BAKE_RESOLUTION}")
    centers = voxel_centers(scene.bbox_min, scene.bbox_max, resolution)
    density, albedo = scene_density_albedo(scene, centers.reshape(-1, 3))
    raw = np.full(density.shape, EMPTY_RAW_DENSITY)
    occupied = density > 0
    raw[occupied] = inverse_softplus(density[occupied])
    shape = (resolution, resolution, resolution)
    logger.debug(
        "Baked %s primitives, %s of %s voxels occupied",
        len(scene.primitives),
        int(occupied.sum()),
        density.size,
    )
    return RadianceGrid(
        bbox_min=np.array(scene.bbox_min, dtype=np.float64),
        bbox_max=np.array(scene.bbox_max, dtype=np.float64),
        sh_degree=0,
        density=raw.reshape(shape),
        sh_coeffs=(albedo / SH_C0).reshape(*shape, 1, 3),
    )


def render_scene_analytic(
    scene: ToyScene,
    pose: Pose,
    intr: Intrinsics,
    cfg: SamplingConfig,
    supersample: int = 4,
) -> npt.NDArray:
    """
    Ray-march the analytic scene at bin centres with supersample times the samples
    of cfg. Used as reference renderer for baked grids.

    :return: (H, W, 3) image
    """
    n_samples = cfg.n_samples * supersample
    delta = (cfg.t_far - cfg.t_near) / n_samples
    origins, directions = generate_rays(intr, pose)
    t = cfg.t_near + (np.arange(n_samples) + 0.5) * delta
    points = origins[:, None, :] + t[None, :, None] * directions[:, None, :]
    density, albedo = scene_density_albedo(scene, points.reshape(-1, 3))
    tau = density.reshape(len(origins), n_samples) * delta
    cum = np.cumsum(tau, axis=1)
    before = np.concatenate([np.zeros((len(origins), 1)), cum[:, :-1]], axis=1)
    trans = np.exp(-before)
    weights = trans * -np.expm1(-tau)
    colors = (weights[..., None] * albedo.reshape(len(origins), n_samples, 3)).sum(1)
    if scene.background == "white":
        colors += np.exp(-cum[:, -1])[:, None]
    return colors.reshape(intr.height, intr.width, 3)


def novel_view_poses(
    start: Pose, end: Pose, n_frames: int, literal: bool = False
) -> list[Pose]:
    """Poses halfway between consecutive frames of an N-frame trajectory"""
    fractions = [
        interpolation_fraction(i, n_frames, literal) for i in range(1, n_frames + 1)
    ]
    return [
        interpolate_pose_at(start, end, 0.5 * (a + b))
        for a, b in zip(fractions, fractions[1:])
    ]


def dataset_trajectory(cfg: DatasetConfig) -> tuple[Pose, Pose]:
    """Identity start pose and the configured relative end pose"""
    start = Pose.identity()
    end = Pose(
        rotation=so3_exp(cfg.trajectory_rotation),
        translation=np.array(cfg.trajectory_translation, dtype=np.float64),
    )
    return start, end


def render_ground_truth(
    grid: RadianceGrid,
    poses: list[Pose],
    intr: Intrinsics,
    cfg: SamplingConfig,
) -> npt.NDArray:
    """Frames (N, H, W, 3) rendered at bin centres"""
    sampling = cfg.model_copy(update={"stratified": False})
    return np.stack([render_frame(grid, pose, intr, sampling) for pose in poses])


def make_dataset(
    scene: ToyScene,
    trajectory: tuple[Pose, Pose],
    intr: Intrinsics,
    n_frames: int,
    overlap_rate: float,
    noise_sigma: float = 0.0,
    seed: int = 0,
    grid_resolution: int = 64,
    sampling: Optional[SamplingConfig] = None,
    mask_mode: Literal["exact", "bernoulli"] = "exact",
    literal: bool = False,
    novel_views: bool = True,
    output_dir: Optional[Path | str] = None,
) -> Dataset:
    """
    Render N ground-truth frames along a linear trajectory from the baked scene and
    encode them into one measurement.

    :param scene: Toy scene
    :param trajectory: Start and end pose of the exposure
    :param intr: Camera intrinsics
    :param n_frames: Compression ratio N
    :param overlap_rate: Mask overlapping rate
    :param noise_sigma: Standard deviation of the measurement noise
    :param seed: Seed of masks and noise
    :param grid_resolution: Resolution of the baked ground-truth grid
    :param sampling: Ray sampling for the ground-truth frames
    :param mask_mode: "exact" or "bernoulli"
    :param literal: Use i / N as interpolation fraction
    :param novel_views: Also render ground truth at the poses halfway between
        consecutive frames
    :param output_dir: If set, all artifacts are written to this directory

    :return: Dataset with measurement, masks, frames (N, H, W, 3) and frame poses
    """
    if sampling is None:
        sampling = SamplingConfig()
    sampling = sampling.model_copy(
        update={"white_background": scene.background == "white"}
    )
    start, end = trajectory
    grid = bake_scene(scene, grid_resolution)
    poses = [
        interpolate_pose(start, end, i, n_frames, literal)
        for i in range(1, n_frames + 1)
    ]
    frames = render_ground_truth(grid, poses, intr, sampling).astype(np.float32)
    stack = generate_masks(
        intr.height, intr.width, n_frames, overlap_rate, seed, mode=mask_mode
    )
    measurement = encode_measurement(frames, stack, noise_sigma, seed)
    novel_poses = novel_view_poses(start, end, n_frames, literal)
    novel_frames: Optional[npt.NDArray] = None
    if novel_views and novel_poses:
        novel_frames = render_ground_truth(grid, novel_poses, intr, sampling)
        novel_frames = novel_frames.astype(np.float32)
    dataset = Dataset(
        measurement=measurement,
        stack=stack,
        frames=frames,
        poses=poses,
        start=start,
        end=end,
        novel_frames=novel_frames,
    )
    if output_dir is not None:
        write_dataset(output_dir, dataset, grid)
    return dataset


def make_dataset_from_config(
    cfg: DatasetConfig,
    camera: CameraConfig,
    sampling: SamplingConfig,
    output_dir: Optional[Path | str] = None,
) -> Dataset:
    return make_dataset(
        preset_scene(cfg.preset),
        dataset_trajectory(cfg),
        camera.to_intrinsics(),
        cfg.n_frames,
        cfg.overlap_rate,
        noise_sigma=cfg.noise_sigma,
        seed=cfg.seed,
        grid_resolution=cfg.grid_resolution,
        sampling=sampling,
        mask_mode=cfg.mask_mode,
        output_dir=output_dir,
    )


def write_dataset(
    directory: Path | str, dataset: Dataset, grid: Optional[RadianceGrid] = None
) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_masks(directory / MASKS_FILE, dataset.stack)
    write_measurement(directory / MEASUREMENT_FILE, dataset.measurement)
    write_tensor(directory / FRAMES_FILE, dataset.frames)
    write_poses(directory / POSES_FILE, [dataset.start, dataset.end, *dataset.poses])
    if grid is not None:
        write_grid(directory / GRID_FILE, grid)
    if dataset.novel_frames is not None:
        write_tensor(directory / NOVEL_FRAMES_FILE, dataset.novel_frames)
    logger.info("Dataset with %s frames written to %s", len(dataset.poses), directory)
    return directory


def load_dataset(directory: Path | str) -> Dataset:
    """Read a dataset written by make_dataset"""
    directory = Path(directory)
    poses = read_poses(directory / POSES_FILE)
    novel_path = directory / NOVEL_FRAMES_FILE
    return Dataset(
        measurement=read_measurement(directory / MEASUREMENT_FILE),
        stack=read_masks(directory / MASKS_FILE),
        frames=read_tensor(directory / FRAMES_FILE),
        poses=poses[2:],
        start=poses[0],
        end=poses[1],
        novel_frames=read_tensor(novel_path) if novel_path.is_file() else None,
    )
