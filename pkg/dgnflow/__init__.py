"""dgnflow: deep graph neural networks with differentiable group normalization.

dgnflow trains GCN, GAT and SGC models of arbitrary depth on attributed
graphs, with batch, pair or differentiable group normalization between the
propagation layers, and measures over-smoothing through the group distance
ratio and the instance information gain.
"""

# ruff : noqa: F401
from dgnflow import autodiff, graph, layers, metrics, plots
from dgnflow.experiment import (
    ExperimentConfig,
    ResultRecord,
    SplitConfig,
    best_depths,
    export_embeddings,
    groups_used,
    improvement_table,
    load_dataset,
    run_experiment,
    sweep,
    tune_lambda,
)
from dgnflow.training import ModelConfig, TrainConfig, evaluate, train
from dgnflow.version import __version__, show_versions
