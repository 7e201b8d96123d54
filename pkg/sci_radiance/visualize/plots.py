import logging
from typing import Optional

import numpy as np
import numpy.typing as npt
import pandas as pd
import plotly.graph_objects as go
from plotly.graph_objs import Figure
from plotly.subplots import make_subplots

from sci_radiance.exceptions import VisualizationSetupError
from sci_radiance.model import Pose
from sci_radiance.utils.fileio import to_uint8
from sci_radiance.visualize.constants import (
    DEFAULT_LINE_COLORS,
    SWEEP_COLORS,
    SWEEP_TITLES,
)

logger = logging.getLogger(__name__)


def plot_loss_history(history: pd.DataFrame, log_y: bool = True) -> Figure:
    """
    Loss curve of a training run with the scene learning rate on a secondary axis.

    :param history: Loss history with columns iter, loss, lr_scene (and lr_pose)
    :param log_y: Use a logarithmic loss axis

    :raises VisualizationSetupError: If required columns are missing or the
        history is empty
    :return: Plotly figure
    """
    for column in ("iter", "loss", "lr_scene"):
        if column not in history.columns:
            raise VisualizationSetupError(
                "Column %s not part of the passed history" % column
            )
    if history.empty:
        raise VisualizationSetupError("Loss history is empty")

    fig = make_subplots(specs=[[{"secondary_y": True}]])
    fig.add_trace(
        go.Scatter(
            x=history["iter"],
            y=history["loss"],
            mode="lines",
            name="Loss",
            line=dict(color=DEFAULT_LINE_COLORS[0]),
        ),
        secondary_y=False,
    )
    fig.add_trace(
        go.Scatter(
            x=history["iter"],
            y=history["lr_scene"],
            mode="lines",
            name="Scene LR",
            line=dict(color=DEFAULT_LINE_COLORS[1], dash="dash"),
        ),
        secondary_y=True,
    )
    fig.update_xaxes(title_text="Iteration")
    fig.update_yaxes(
        title_text="Loss", type="log" if log_y else "linear", secondary_y=False
    )
    fig.update_yaxes(title_text="Learning rate", type="log", secondary_y=True)
    return fig


def plot_frames(
    frames: npt.NDArray,
    titles: Optional[list[str]] = None,
    n_cols: int = 4,
) -> Figure:
    """
    Show a stack of frames (N, H, W[, C]) in [0, 1] as image grid.

    :param frames: Frames to show
    :param titles: Optional subplot title per frame
    :param n_cols: Number of columns of the grid

    :raises VisualizationSetupError: If titles do not match the frames
    :return: Plotly figure
    """
    frames = np.asarray(frames)
    if frames.ndim == 3:
        frames = np.repeat(frames[..., None], 3, axis=3)
    elif frames.shape[-1] == 1:
        frames = np.repeat(frames, 3, axis=3)
    n_frames = len(frames)
    if titles is None:
        titles = [f"Frame {i}" for i in range(1, n_frames + 1)]
    if len(titles) != n_frames:
        raise VisualizationSetupError("Number of titles and frames differ")

    n_cols = min(n_cols, n_frames)
    n_rows = int(np.ceil(n_frames / n_cols))
    fig = make_subplots(rows=n_rows, cols=n_cols, subplot_titles=titles)
    for idx, frame in enumerate(frames):
        fig.add_trace(
            go.Image(z=to_uint8(frame)),
            row=idx // n_cols + 1,
            col=idx % n_cols + 1,
        )
    fig.update_xaxes(showticklabels=False)
    fig.update_yaxes(showticklabels=False)
    return fig


def plot_sweep(results: pd.DataFrame) -> Figure:
    """
    PSNR of trainer and GAP-TV against the swept setting.

    :param results: Sweep results with columns setting, value, trainer_psnr and
        gaptv_psnr

    :raises VisualizationSetupError: If the results mix several settings
    :return: Plotly figure
    """
    settings = results["setting"].unique()
    if len(settings) != 1:
        raise VisualizationSetupError("Sweep results must contain a single setting")
    setting = settings[0]

    fig = go.Figure()
    for column, name in (("trainer_psnr", "Radiance field"), ("gaptv_psnr", "GAP-TV")):
        fig.add_trace(
            go.Scatter(
                x=results["value"],
                y=results[column],
                mode="lines+markers",
                name=name,
                line=dict(color=SWEEP_COLORS[column]),
            )
        )
    fig.update_layout(
        xaxis_title=SWEEP_TITLES.get(setting, setting),
        yaxis_title="PSNR [dB]",
    )
    return fig


def plot_trajectory(
    poses: list[Pose],
    reference: Optional[list[Pose]] = None,
) -> Figure:
    """
    Camera centres and viewing directions of a trajectory in 3D, optionally next to
    a reference trajectory.
    """
    fig = go.Figure()
    for name, trajectory, color in (
        ("Recovered", poses, DEFAULT_LINE_COLORS[0]),
        ("Reference", reference, DEFAULT_LINE_COLORS[1]),
    ):
        if not trajectory:
            continue
        centers = np.array([pose.translation for pose in trajectory])
        fig.add_trace(
            go.Scatter3d(
                x=centers[:, 0],
                y=centers[:, 1],
                z=centers[:, 2],
                mode="lines+markers",
                name=name,
                line=dict(color=color),
                marker=dict(size=3, color=color),
            )
        )
        axes = np.array([pose.rotation[:, 2] for pose in trajectory])
        fig.add_trace(
            go.Cone(
                x=centers[:, 0],
                y=centers[:, 1],
                z=centers[:, 2],
                u=axes[:, 0],
                v=axes[:, 1],
                w=axes[:, 2],
                sizemode="absolute",
                sizeref=0.05,
                showscale=False,
                colorscale=[[0, color], [1, color]],
                name=f"{name} view",
            )
        )
    fig.update_layout(scene=dict(aspectmode="data"))
    return fig
