import logging
import sys
from pathlib import Path
from typing import Any, Callable, Optional

import click
import numpy as np
import numpy.typing as npt
from pydantic import ValidationError
from rich.console import Console
from rich.markup import escape

from sci_radiance.exceptions import (
    AngleNearPiError,
    ConfigurationError,
    DimensionMismatchError,
    FileFormatError,
    ImageTooSmallError,
    NonIntegerOnesCountError,
    PixelOutOfBoundsError,
    ShapeMismatchError,
    ZeroMaskPixelError,
)
from sci_radiance.experiments import compression_sweep, overlap_sweep
from sci_radiance.field import render_frame
from sci_radiance.gaptv import gap_tv_decode
from sci_radiance.metrics import evaluate_frames, trajectory_error
from sci_radiance.model import Pose, RadianceGrid
from sci_radiance.scene import (
    load_dataset,
    make_dataset_from_config,
    novel_view_poses,
)
from sci_radiance.sci import encode_measurement
from sci_radiance.trainer import (
    evaluation_sampling,
    load_checkpoint,
    save_checkpoint,
    train,
    trajectory_endpoints,
    trajectory_from_poses,
)
from sci_radiance.utils.base import init_logging, verbosity_to_level
from sci_radiance.utils.config import AppConfig, load_config, write_config
from sci_radiance.utils.fileio import (
    read_masks,
    read_poses,
    read_tensor,
    save_png_sequence,
    write_measurement,
    write_tensor,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

DATA_ERRORS = (
    AngleNearPiError,
    DimensionMismatchError,
    FileFormatError,
    ImageTooSmallError,
    NonIntegerOnesCountError,
    PixelOutOfBoundsError,
    ShapeMismatchError,
    ZeroMaskPixelError,
    OSError,
)

CONFIG_FILE = "config.ini"
LOSS_FILE = "loss.csv"
RECONSTRUCTION_FILE = "frames.sctf"


def config_options(func: Callable) -> Callable:
    func = click.option(
        "--set",
        "overrides",
        multiple=True,
        help="Override a config value. Example: --set train.iterations=500",
    )(func)
    func = click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False),
        default=None,
        help="INI config file. Model defaults are used for missing values.",
    )(func)
    func = click.option(
        "-v", "--verbose", count=True, help="Set the verbosity level of the script."
    )(func)
    return func


def _setup(
    config_path: Optional[str], overrides: tuple[str, ...], verbose: int
) -> AppConfig:
    if verbose > 0:
        init_logging(verbosity_to_level(verbose))
    return load_config(config_path, overrides)


def _render_views(grid: RadianceGrid, poses: list[Pose], cfg: AppConfig) -> npt.NDArray:
    intr = cfg.camera.to_intrinsics()
    sampling = evaluation_sampling(cfg.train.sampling)
    return np.stack(
        [
            render_frame(
                grid,
                pose,
                intr,
                sampling,
                chunk_size=cfg.train.chunk_size,
                n_workers=cfg.train.n_workers,
            )
            for pose in poses
        ]
    )


def _as_frame_stack(array: npt.NDArray) -> npt.NDArray:
    if array.ndim == 2 or (array.ndim == 3 and array.shape[-1] in (1, 3)):
        return array[None]
    return array


@click.group()
def cli() -> None:
    """
    Snapshot compressive imaging with radiance fields: simulate the encoder,
    recover scene and camera trajectory from a single measurement and compare with
    GAP-TV.
    """


@cli.command("make-dataset")
@click.argument("output_dir", type=click.Path(file_okay=False))
@click.option("--png-dir", type=click.Path(file_okay=False), default=None)
@config_options
def make_dataset_cmd(
    output_dir: str,
    png_dir: Optional[str],
    config_path: Optional[str],
    overrides: tuple[str, ...],
    verbose: int,
) -> None:
    """Render a toy scene along a trajectory and encode it into OUTPUT_DIR"""
    console = Console()
    cfg = _setup(config_path, overrides, verbose)
    console.print(
        f"Generating [bold]{cfg.dataset.preset}[/bold] dataset with "
        f"{cfg.dataset.n_frames} frames"
    )
    dataset = make_dataset_from_config(
        cfg.dataset, cfg.camera, cfg.sampling, output_dir
    )
    write_config(Path(output_dir) / CONFIG_FILE, cfg)
    if png_dir is not None:
        save_png_sequence(png_dir, dataset.frames)
        save_png_sequence(
            png_dir,
            (dataset.measurement.pixels / cfg.dataset.n_frames)[None],
            prefix="measurement",
        )
    console.print(f":white_check_mark: Dataset written to {output_dir}")


@cli.command("encode")
@click.option("--frames", "frames_path", required=True, type=click.Path())
@click.option("--masks", "masks_path", required=True, type=click.Path())
@click.option("--output", "output_path", required=True, type=click.Path())
@config_options
def encode_cmd(
    frames_path: str,
    masks_path: str,
    output_path: str,
    config_path: Optional[str],
    overrides: tuple[str, ...],
    verbose: int,
) -> None:
    """Encode a frame tensor with a mask file into a measurement file"""
    console = Console()
    cfg = _setup(config_path, overrides, verbose)
    frames = read_tensor(frames_path)
    stack = read_masks(masks_path)
    measurement = encode_measurement(
        frames, stack, cfg.dataset.noise_sigma, cfg.dataset.seed
    )
    write_measurement(output_path, measurement)
    console.print(f":white_check_mark: Measurement written to {output_path}")


@cli.command("train")
@click.argument("dataset_dir", type=click.Path(file_okay=False))
@click.option("--output", "output_dir", required=True, type=click.Path())
@click.option(
    "--known-poses",
    is_flag=True,
    help="Use the dataset trajectory and keep it fixed.",
)
@click.option("--png-dir", type=click.Path(file_okay=False), default=None)
@click.option(
    "--plot", "plot_path", type=click.Path(), default=None, help="Loss curve HTML"
)
@config_options
def train_cmd(
    dataset_dir: str,
    output_dir: str,
    known_poses: bool,
    png_dir: Optional[str],
    plot_path: Optional[str],
    config_path: Optional[str],
    overrides: tuple[str, ...],
    verbose: int,
) -> None:
    """Recover grid and trajectory from the measurement in DATASET_DIR"""
    console = Console()
    cfg = _setup(config_path, overrides, verbose)
    dataset = load_dataset(dataset_dir)
    intr = cfg.camera.to_intrinsics()
    train_cfg = cfg.train
    trajectory = None
    if known_poses:
        trajectory = trajectory_from_poses(dataset.start, dataset.end)
        train_cfg = train_cfg.model_copy(update={"optimize_poses": False})

    console.print(f"Training for {train_cfg.iterations} iterations")
    result = train(
        dataset.measurement, dataset.stack, intr, train_cfg, trajectory=trajectory
    )
    n_frames = dataset.stack.n_frames
    out = save_checkpoint(
        output_dir,
        result.grid,
        result.trajectory,
        n_frames,
        result.scene_state,
        result.pose_state,
        literal=train_cfg.literal_interpolation,
    )
    result.history.to_csv(out / LOSS_FILE, index=False)
    saved_grid, _, frame_poses, _, _ = load_checkpoint(out)
    frames = _render_views(saved_grid, frame_poses, cfg)
    write_tensor(out / RECONSTRUCTION_FILE, frames)
    if png_dir is not None:
        save_png_sequence(png_dir, frames)
    if plot_path is not None and not result.history.empty:
        from sci_radiance.visualize import plot_loss_history

        plot_loss_history(result.history).write_html(plot_path)

    if not result.history.empty:
        console.print(f"Final loss: {result.history['loss'].iloc[-1]:.6g}")
    console.print(f":white_check_mark: Checkpoint written to {out}")


@cli.command("decode-gaptv")
@click.argument("dataset_dir", type=click.Path(file_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--png-dir", type=click.Path(file_okay=False), default=None)
@config_options
def decode_gaptv_cmd(
    dataset_dir: str,
    output_path: str,
    png_dir: Optional[str],
    config_path: Optional[str],
    overrides: tuple[str, ...],
    verbose: int,
) -> None:
    """Decode the measurement in DATASET_DIR with GAP-TV"""
    console = Console()
    cfg = _setup(config_path, overrides, verbose)
    dataset = load_dataset(dataset_dir)
    frames = gap_tv_decode(dataset.measurement, dataset.stack, cfg.gaptv)
    write_tensor(output_path, frames)
    if png_dir is not None:
        save_png_sequence(png_dir, frames)
    console.print(f":white_check_mark: GAP-TV frames written to {output_path}")


@cli.command("render")
@click.argument("checkpoint_dir", type=click.Path(file_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option(
    "--poses",
    "poses_path",
    type=click.Path(),
    default=None,
    help="Pose text file. Defaults to the frame poses of the checkpoint.",
)
@click.option(
    "--novel",
    is_flag=True,
    help="Render the views halfway between consecutive frames.",
)
@click.option("--png-dir", type=click.Path(file_okay=False), default=None)
@config_options
def render_cmd(
    checkpoint_dir: str,
    output_path: str,
    poses_path: Optional[str],
    novel: bool,
    png_dir: Optional[str],
    config_path: Optional[str],
    overrides: tuple[str, ...],
    verbose: int,
) -> None:
    """Render views of a trained checkpoint"""
    console = Console()
    cfg = _setup(config_path, overrides, verbose)
    grid, trajectory, frame_poses, _, _ = load_checkpoint(checkpoint_dir)
    if poses_path is not None:
        poses = read_poses(poses_path)
    elif novel:
        start, end = trajectory_endpoints(trajectory)
        poses = novel_view_poses(
            start, end, len(frame_poses), cfg.train.literal_interpolation
        )
    else:
        poses = frame_poses
    if not poses:
        raise DimensionMismatchError("No poses to render")

    frames = _render_views(grid, poses, cfg)
    write_tensor(output_path, frames)
    if png_dir is not None:
        save_png_sequence(png_dir, frames, prefix="view")
    console.print(f":white_check_mark: {len(poses)} views written to {output_path}")


@cli.command("eval")
@click.option("--ref", "ref_path", required=True, type=click.Path())
@click.option("--cand", "cand_path", required=True, type=click.Path())
@click.option(
    "--output", "output_path", type=click.Path(), default=None, help="CSV file"
)
@click.option(
    "--poses", "poses_path", type=click.Path(), default=None, help="Recovered poses"
)
@click.option(
    "--gt-poses", "gt_poses_path", type=click.Path(), default=None, help="True poses"
)
@config_options
def eval_cmd(
    ref_path: str,
    cand_path: str,
    output_path: Optional[str],
    poses_path: Optional[str],
    gt_poses_path: Optional[str],
    config_path: Optional[str],
    overrides: tuple[str, ...],
    verbose: int,
) -> None:
    """
    PSNR and SSIM per frame of two frame tensors as CSV. With --poses and --gt-poses
    the endpoint error of the recovered trajectory is reported as well.
    """
    if (poses_path is None) != (gt_poses_path is None):
        raise click.UsageError("--poses and --gt-poses must be given together")
    _setup(config_path, overrides, verbose)
    error = None
    if poses_path is not None and gt_poses_path is not None:
        recovered = read_poses(poses_path)
        truth = read_poses(gt_poses_path)
        if len(recovered) < 2 or len(truth) < 2:
            raise DimensionMismatchError("Pose files need start and end pose")
        error = trajectory_error(recovered[0], recovered[1], truth[0], truth[1])
    reference = _as_frame_stack(read_tensor(ref_path))
    candidate = _as_frame_stack(read_tensor(cand_path))
    metrics = evaluate_frames(reference, candidate)
    csv = metrics.to_csv(index=False)
    if output_path is not None:
        with open(output_path, "w") as f:
            f.write(csv)
    click.echo(csv, nl=False)

    if error is not None:
        Console(stderr=True).print(
            f"Trajectory end error: {error.translation_error:.4g} "
            f"({100 * error.relative_error:.2f}% of the trajectory length), "
            f"rotation {error.rotation_error_degrees:.3g} deg"
        )


@cli.command("sweep")
@click.option(
    "--setting",
    type=click.Choice(["overlap", "compression"]),
    required=True,
    help="Swept quantity: mask overlapping rate or compression ratio.",
)
@click.option(
    "--values",
    "raw_values",
    required=True,
    help="Comma separated values. Example: 0.125,0.25,0.5,0.75",
)
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--plot", "plot_path", type=click.Path(), default=None)
@config_options
def sweep_cmd(
    setting: str,
    raw_values: str,
    output_path: str,
    plot_path: Optional[str],
    config_path: Optional[str],
    overrides: tuple[str, ...],
    verbose: int,
) -> None:
    """Ablation over overlapping rate or compression ratio on the configured scene"""
    console = Console()
    cfg = _setup(config_path, overrides, verbose)
    try:
        values: list[Any] = [
            int(v) if setting == "compression" else float(v)
            for v in raw_values.split(",")
        ]
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="--values") from e

    sweep = overlap_sweep if setting == "overlap" else compression_sweep
    results = sweep(values, cfg.dataset, cfg.camera, cfg.train, cfg.gaptv)
    results.to_csv(output_path, index=False)
    if plot_path is not None:
        from sci_radiance.visualize import plot_sweep

        plot_sweep(results).write_html(plot_path)
    console.print(f":white_check_mark: Sweep results written to {output_path}")


def run(argv: Optional[list[str]] = None) -> int:
    """
    Run the command line interface and map failures onto exit codes: 0 success,
    1 usage or configuration error, 2 data error.
    """
    err_console = Console(stderr=True)
    try:
        result = cli.main(
            args=argv, prog_name="sci-radiance", standalone_mode=False
        )
    except click.UsageError as e:
        if e.ctx is not None:
            click.echo(e.ctx.get_usage(), err=True)
        err_console.print(f":x: {escape(e.format_message())}")
        return EXIT_USAGE
    except click.ClickException as e:
        err_console.print(f":x: {escape(e.format_message())}")
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except (ConfigurationError, ValidationError) as e:
        err_console.print(f":x: Invalid configuration: {escape(str(e))}")
        return EXIT_USAGE
    except DATA_ERRORS as e:
        err_console.print(f":x: {type(e).__name__}: {escape(str(e))}")
        return EXIT_DATA
    return result if isinstance(result, int) else EXIT_OK


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
