"""Plots of sweep curves and training histories.

The functions take the frames written by the experiment runner, so curves
can be plotted from a fresh sweep or from ``curves.csv`` read back with
pandas.

Example::

    import pandas as pd
    from dgnflow.plots import SweepPlots

    plots = SweepPlots(pd.read_csv("results/curves.csv"))
    plots.depth_curves("acc_mean")
"""

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from dgnflow.errors import ParameterError

__all__ = ["SweepPlots", "plot_depth_curves", "plot_history", "plot_hyperparameters"]

METRIC_LABELS = {
    "acc_mean": "test accuracy",
    "g_ins": "instance information gain",
    "r_group": "group distance ratio",
    "intra_group": "intra-group distance",
    "seconds": "seconds",
}


def _check_columns(frame, columns):
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParameterError(f"frame lacks columns {missing}")


def plot_depth_curves(curves, metric="acc_mean", ax=None, figsize=None, std=True):
    """Plot a metric against the depth, one line per normalizer setting.

    DGN lines with several (G, lambda) settings get one line each.

    Parameters
    ----------
    curves : pandas.DataFrame
        Frame with the columns of curves.csv.
    metric : str, optional
        Column to plot, by default 'acc_mean'
    ax : matplotlib.Axes, optional
        axes to plot on, default is None which creates a new figure
    figsize : tuple of 2 values, optional
        size of figure
    std : bool, optional
        shade one standard deviation around the accuracy, by default True

    Returns
    -------
    ax : matplotlib.Axes
        axes with plot
    """
    _check_columns(curves, ["K", "norm", "G", "lambda", metric])
    if ax is None:
        _, ax = plt.subplots(figsize=figsize)
    for norm, part in curves.groupby("norm", sort=False):
        settings = part.groupby(["G", "lambda"], sort=True) if norm == "dgn" else None
        if settings is None or settings.ngroups == 1:
            lines = [(norm, part.drop_duplicates("K"))]
        else:
            lines = [(f"dgn (G={g}, lambda={lam:g})", p) for (g, lam), p in settings]
        for label, line in lines:
            line = line.sort_values("K")
            (h,) = ax.plot(line["K"], line[metric], marker="o", label=label)
            if std and metric == "acc_mean" and "acc_std" in line:
                ax.fill_between(
                    line["K"],
                    line[metric] - line["acc_std"],
                    line[metric] + line["acc_std"],
                    color=h.get_color(),
                    alpha=0.2,
                )
    ax.set_xlabel("number of layers K")
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    ax.legend(frameon=False)
    ax.grid(True)
    return ax


def plot_hyperparameters(curves, depth=None, ax=None, figsize=None, cmap="viridis"):
    """Accuracy heatmap of DGN over group counts and balancing factors.

    Parameters
    ----------
    curves : pandas.DataFrame
        Frame with the columns of curves.csv and DGN rows.
    depth : int, optional
        Depth to show, by default the largest depth in ``curves``
    ax : matplotlib.Axes, optional
        axes to plot on, default is None which creates a new figure
    figsize : tuple of 2 values, optional
        size of figure
    cmap : str, optional
        colormap, by default 'viridis'

    Returns
    -------
    ax : matplotlib.Axes
        axes with plot
    """
    _check_columns(curves, ["K", "norm", "G", "lambda", "acc_mean"])
    dgn = curves[curves["norm"] == "dgn"]
    if dgn.empty:
        raise ParameterError("no DGN rows to plot")
    depth = dgn["K"].max() if depth is None else depth
    grid = dgn[dgn["K"] == depth].pivot_table(
        index="G", columns="lambda", values="acc_mean", aggfunc="mean"
    )
    if ax is None:
        _, ax = plt.subplots(figsize=figsize)
    im = ax.imshow(grid.to_numpy(), cmap=cmap, origin="lower", aspect="auto")
    ax.set_xticks(np.arange(grid.shape[1]), [f"{v:g}" for v in grid.columns])
    ax.set_yticks(np.arange(grid.shape[0]), [str(v) for v in grid.index])
    ax.set_xlabel("lambda")
    ax.set_ylabel("groups G")
    ax.set_title(f"K = {depth}")
    ax.figure.colorbar(im, ax=ax, label="test accuracy")
    return ax


def plot_history(history, ax=None, figsize=None):
    """Plot training loss and validation accuracy per epoch.

    Parameters
    ----------
    history : History or pandas.DataFrame
        Training history or its frame.
    ax : matplotlib.Axes, optional
        axes for the loss, default is None which creates a new figure; the
        accuracy goes on a twin axis

    Returns
    -------
    ax : matplotlib.Axes
        axes with the loss
    """
    frame = history if isinstance(history, pd.DataFrame) else history.to_frame()
    if ax is None:
        _, ax = plt.subplots(figsize=figsize)
    ax.plot(frame.index, frame["train_loss"], color="C0", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("train loss")
    ax2 = ax.twinx()
    ax2.plot(frame.index, frame["val_accuracy"], color="C1", label="val accuracy")
    ax2.set_ylabel("validation accuracy")
    best = getattr(history, "best_epoch", 0)
    if best:
        ax.axvline(best, color="k", ls=":", lw=1)
    return ax


class SweepPlots:
    """Plots bound to one curves frame.

    Parameters
    ----------
    curves : pandas.DataFrame
        Frame with the columns of curves.csv.
    """

    def __init__(self, curves):
        self._curves = curves

    def __repr__(self):
        methods = "".join(
            [f"\n - {meth}" for meth in dir(self) if not meth.startswith("_")]
        )
        return "dgnflow sweep plots, available methods:" + methods

    def depth_curves(self, metric="acc_mean", ax=None, figsize=None, std=True):
        """Metric against depth, see :func:`plot_depth_curves`."""
        return plot_depth_curves(self._curves, metric, ax=ax, figsize=figsize, std=std)

    def metrics(self, figsize=None):
        """Accuracy and the three over-smoothing metrics in a 2 x 2 grid.

        Returns
        -------
        axes : numpy.ndarray of matplotlib.Axes
        """
        _, axes = plt.subplots(2, 2, figsize=figsize, sharex=True)
        for ax, metric in zip(
            axes.ravel(), ["acc_mean", "g_ins", "r_group", "intra_group"], strict=True
        ):
            plot_depth_curves(self._curves, metric, ax=ax)
        return axes

    def hyperparameters(self, depth=None, ax=None, figsize=None):
        """DGN accuracy over G and lambda, see :func:`plot_hyperparameters`."""
        return plot_hyperparameters(self._curves, depth, ax=ax, figsize=figsize)
