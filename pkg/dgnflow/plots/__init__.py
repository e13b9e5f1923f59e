"""Plotting helpers for sweep curves and training histories."""

# ruff : noqa: F401
from dgnflow.plots.plots import (
    SweepPlots,
    plot_depth_curves,
    plot_history,
    plot_hyperparameters,
)
