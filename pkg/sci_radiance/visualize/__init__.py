from .plots import plot_frames, plot_loss_history, plot_sweep, plot_trajectory

__all__ = [
    "plot_loss_history",
    "plot_frames",
    "plot_sweep",
    "plot_trajectory",
]
