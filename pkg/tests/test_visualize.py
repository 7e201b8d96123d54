import numpy as np
import pandas as pd
import plotly.graph_objects as go
import pytest

from sci_radiance.exceptions import VisualizationSetupError
from sci_radiance.experiments import SWEEP_COLUMNS
from sci_radiance.model import Pose
from sci_radiance.trainer import HISTORY_COLUMNS
from sci_radiance.visualize import (
    plot_frames,
    plot_loss_history,
    plot_sweep,
    plot_trajectory,
)


@pytest.fixture()
def history() -> pd.DataFrame:
    return pd.DataFrame(
        [(0, 1.0, 0.05, 1e-3), (1, 0.5, 0.04, 1e-4), (2, 0.2, 0.03, 1e-5)],
        columns=HISTORY_COLUMNS,
    )


@pytest.mark.parametrize("log_y", [True, False])
def test_plot_loss_history(history: pd.DataFrame, log_y: bool) -> None:
    fig = plot_loss_history(history, log_y=log_y)

    assert isinstance(fig, go.Figure)
    assert len(fig.data) == 2
    assert list(fig.data[0].y) == [1.0, 0.5, 0.2]


def test_plot_loss_history_missing_column(history: pd.DataFrame) -> None:
    with pytest.raises(VisualizationSetupError, match="lr_scene"):
        plot_loss_history(history.drop(columns=["lr_scene"]))


def test_plot_loss_history_empty(history: pd.DataFrame) -> None:
    with pytest.raises(VisualizationSetupError, match="empty"):
        plot_loss_history(history.iloc[:0])


@pytest.mark.parametrize("shape", [(5, 4, 6), (5, 4, 6, 1), (5, 4, 6, 3)])
def test_plot_frames(rng: np.random.Generator, shape: tuple[int, ...]) -> None:
    fig = plot_frames(rng.random(shape), n_cols=2)

    assert len(fig.data) == 5
    assert all(isinstance(trace, go.Image) for trace in fig.data)
    assert np.asarray(fig.data[0].z).shape == (4, 6, 3)


def test_plot_frames_titles_mismatch(rng: np.random.Generator) -> None:
    with pytest.raises(VisualizationSetupError):
        plot_frames(rng.random((3, 4, 4)), titles=["a", "b"])


def test_plot_sweep() -> None:
    results = pd.DataFrame(
        [("n_frames", 4, 25.0, 22.0), ("n_frames", 8, 23.0, 19.0)],
        columns=SWEEP_COLUMNS,
    )

    fig = plot_sweep(results)

    assert len(fig.data) == 2
    assert fig.layout.xaxis.title.text == "Compression ratio"


def test_plot_sweep_mixed_settings() -> None:
    results = pd.DataFrame(
        [("n_frames", 4, 25.0, 22.0), ("overlap_rate", 0.5, 23.0, 19.0)],
        columns=SWEEP_COLUMNS,
    )

    with pytest.raises(VisualizationSetupError):
        plot_sweep(results)


def test_plot_trajectory() -> None:
    poses = [
        Pose(rotation=np.eye(3), translation=np.array([0.1 * i, 0.0, 0.0]))
        for i in range(3)
    ]

    assert len(plot_trajectory(poses).data) == 2
    assert len(plot_trajectory(poses, reference=poses).data) == 4
