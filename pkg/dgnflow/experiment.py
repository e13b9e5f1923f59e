"""Experiments: repeated training runs, depth sweeps and result files.

An :class:`ExperimentConfig` names a dataset, a model, training settings and
the metric options. :func:`run_experiment` trains one model per seed on a
fixed split, measures accuracy and over-smoothing metrics on each, and
appends the aggregate to ``results.jsonl`` and ``results.csv``.
:func:`sweep` runs the Cartesian product of depths, normalizers, group
counts and balancing factors and writes the plot-ready ``curves.csv`` and
the best depth per configuration to ``best_depths.csv``.

Example::

    import dgnflow as dg

    cfg = dg.ExperimentConfig.from_json("cora_sgc.json")
    record = dg.run_experiment(cfg)
    curves = dg.sweep(cfg, k_list=[1, 5, 10], norm_list=["none", "dgn"]).curves
"""

import json
import logging
import threading
import time
from dataclasses import asdict, dataclass, field, fields, replace
from itertools import product
from pathlib import Path

import numpy as np
import pandas as pd

from dgnflow.autodiff.tensor import no_grad
from dgnflow.errors import (
    AllRepeatsFailedError,
    ConfigError,
    DivergenceError,
    ParameterError,
    ShapeError,
)
from dgnflow.graph.io import load_content_cites, load_generic
from dgnflow.graph.splits import generate_split, mask_features
from dgnflow.layers.normalization import DgnLayer, dgn_assign
from dgnflow.metrics.distance import DEFAULT_PAIR_CAP
from dgnflow.metrics.information import InfoGainEstimator
from dgnflow.metrics.report import measure
from dgnflow.training import (
    DATASET_PRESETS,
    ModelConfig,
    TrainConfig,
    evaluate,
    train,
)
from dgnflow.version import check_tqdm_parallel

logger = logging.getLogger(__name__)

__all__ = [
    "CURVE_COLUMNS",
    "LAMBDA_CANDIDATES",
    "RESULT_COLUMNS",
    "ExperimentConfig",
    "ResultRecord",
    "ResultWriter",
    "SplitConfig",
    "SweepResult",
    "best_depths",
    "export_embeddings",
    "groups_used",
    "improvement_table",
    "load_dataset",
    "run_experiment",
    "sweep",
    "tune_lambda",
]

SCENARIOS = ("attributed", "missing_features")
FORMATS = ("content_cites", "generic")
LAMBDA_CANDIDATES = (5e-4, 1e-3, 2e-3, 3e-3, 5e-3, 1e-2, 2e-2, 3e-2, 5e-2)

RESULT_COLUMNS = [
    "dataset",
    "dataset_format",
    "model",
    "depth",
    "hidden",
    "norm",
    "groups",
    "lambda",
    "scenario",
    "repeats",
    "seeds",
    "acc_mean",
    "acc_std",
    "g_ins",
    "r_group",
    "intra_group",
    "pair_sample_size",
    "failed_repeats",
    "seconds",
]
CURVE_COLUMNS = [
    "K",
    "norm",
    "G",
    "lambda",
    "acc_mean",
    "acc_std",
    "g_ins",
    "r_group",
    "intra_group",
    "seconds",
]
BEST_COLUMNS = ["norm", "G", "lambda", "K", "acc_mean", "improvement_abs", "improvement_rel"]


@dataclass
class SplitConfig:
    """Sizes and seed of a generated split."""

    per_class: int = 20
    n_val: int = 500
    n_test: int = 1000
    seed: int = 0


def _check_keys(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"'{where}' must be an object")
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key '{key}' in '{where}'")


def _build(cls, data, where):
    _check_keys(cls, data, where)
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"invalid '{where}': {e}") from None


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce an experiment.

    Attributes
    ----------
    dataset : str
        Directory (or ``.content`` file) of a content/cites dataset, or the
        directory of a generic dataset.
    dataset_format : {'content_cites', 'generic'}
    dataset_name : str
        Preset name (cora, citeseer, pubmed, coauthorcs); by default derived
        from the dataset path.
    model : ModelConfig
    train : TrainConfig
    split : SplitConfig or None
        Generated split. None uses the preset sizes for content/cites data
        and the stored ``splits.json`` for generic data.
    sigma2 : float
        Kernel variance of the instance information gain.
    pair_cap : int or None
        Pair cap of the group distance computations.
    scenario : {'attributed', 'missing_features'}
    output_dir : str
    repeats : int
        Number of seeds, ``0, 1, ..., repeats - 1`` unless ``seeds`` is set.
    seeds : list of int or None
    tune_epochs : int
        Epochs of each run while tuning lambda.
    """

    dataset: str
    dataset_format: str = "content_cites"
    dataset_name: str = ""
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitConfig = None
    sigma2: float = 1.0
    pair_cap: int = DEFAULT_PAIR_CAP
    scenario: str = "attributed"
    output_dir: str = "results"
    repeats: int = 5
    seeds: list = None
    tune_epochs: int = 200

    def __post_init__(self):
        if self.dataset_format not in FORMATS:
            raise ConfigError(f"dataset_format must be one of {FORMATS}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be at least 1, got {self.repeats}")
        if self.sigma2 <= 0:
            raise ConfigError(f"sigma2 must be positive, got {self.sigma2}")
        if self.pair_cap is not None and self.pair_cap < 1:
            raise ConfigError(f"pair_cap must be positive, got {self.pair_cap}")
        if self.seeds is not None:
            self.seeds = [int(s) for s in self.seeds]
            if len(self.seeds) != self.repeats:
                self.repeats = len(self.seeds)
        if not self.dataset_name:
            self.dataset_name = Path(self.dataset).stem.lower()

    @property
    def seed_list(self):
        return list(self.seeds) if self.seeds is not None else list(range(self.repeats))

    @classmethod
    def from_dict(cls, data):
        """Build a configuration, applying the dataset preset where unset.

        Raises
        ------
        ConfigError
            On unknown keys at any level or invalid values.
        """
        _check_keys(cls, data, "config")
        if "dataset" not in data:
            raise ConfigError("missing key 'dataset' in 'config'")
        data = dict(data)
        for key in ("model", "train", "split"):
            if data.get(key) is not None and not isinstance(data[key], dict):
                raise ConfigError(f"'{key}' must be an object")
        name = data.get("dataset_name") or Path(data["dataset"]).stem.lower()
        preset = DATASET_PRESETS.get(name)
        model = dict(data.get("model", {}))
        train_opts = dict(data.get("train", {}))
        if preset is not None:
            model.setdefault("groups", preset.groups)
            train_opts.setdefault("learning_rate", preset.learning_rate)
            train_opts.setdefault("weight_decay", preset.weight_decay)
            train_opts.setdefault("dropout", preset.dropout)
        data["model"] = _build(ModelConfig, model, "model")
        data["train"] = _build(TrainConfig, train_opts, "train")
        split = data.get("split")
        if split is not None:
            data["split"] = _build(SplitConfig, split, "split")
        elif preset is not None and data.get("dataset_format", "content_cites") != "generic":
            data["split"] = SplitConfig(preset.per_class, preset.n_val, preset.n_test)
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    @classmethod
    def from_json(cls, path):
        with open(path, encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from None
        return cls.from_dict(data)

    def to_dict(self):
        return asdict(self)


def _content_cites_paths(dataset):
    path = Path(dataset)
    if path.is_dir():
        content = sorted(path.glob("*.content"))
        cites = sorted(path.glob("*.cites"))
        if len(content) != 1 or len(cites) != 1:
            raise FileNotFoundError(
                f"expected one .content and one .cites file in {path}"
            )
        return content[0], cites[0]
    return path.with_suffix(".content"), path.with_suffix(".cites")


def load_dataset(cfg):
    """Load the graph of ``cfg`` with its split and scenario applied."""
    if cfg.dataset_format == "generic":
        g = load_generic(cfg.dataset, name=cfg.dataset_name)
    else:
        content, cites = _content_cites_paths(cfg.dataset)
        g = load_content_cites(content, cites, name=cfg.dataset_name)
    if cfg.split is not None:
        s = cfg.split
        g = g.with_masks(*generate_split(g, s.per_class, s.n_val, s.n_test, s.seed))
    if cfg.scenario == "missing_features":
        g = mask_features(g)
    logger.info("loaded %r", g)
    return g


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


@dataclass
class ResultRecord:
    """Aggregate of one experiment over its repeats."""

    dataset: str
    dataset_format: str
    model: str
    depth: int
    hidden: int
    norm: str
    groups: int
    lam: float
    scenario: str
    repeats: int
    seeds: list
    acc_mean: float
    acc_std: float
    g_ins: float
    r_group: float
    intra_group: float
    pair_sample_size: int
    failed_repeats: list
    seconds: float
    accuracies: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_row(self):
        """Flat row with the columns of results.csv."""
        row = asdict(self)
        row["lambda"] = row.pop("lam")
        row["seeds"] = " ".join(str(s) for s in self.seeds)
        row["failed_repeats"] = len(self.failed_repeats)
        return {c: row[c] for c in RESULT_COLUMNS}

    def to_json(self):
        payload = asdict(self)
        payload["lambda"] = payload.pop("lam")
        return json.dumps(_jsonable(payload))


class ResultWriter:
    """Serialized appends to results.jsonl and results.csv in a directory."""

    def __init__(self, output_dir):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.jsonl_path = self.output_dir / "results.jsonl"
        self.csv_path = self.output_dir / "results.csv"
        self._lock = threading.Lock()

    def write(self, record):
        with self._lock:
            with open(self.jsonl_path, "a", encoding="utf-8") as f:
                f.write(record.to_json() + "\n")
            row = pd.DataFrame([record.to_row()], columns=RESULT_COLUMNS)
            row.to_csv(
                self.csv_path,
                mode="a",
                header=not self.csv_path.exists(),
                index=False,
                encoding="utf-8",
            )


def _mean(values):
    values = [v for v in values if v is not None and np.isfinite(v)]
    return float(np.mean(values)) if values else float("nan")


def run_experiment(cfg, graph=None, writer=None, estimator=None):
    """Train and evaluate one seed per repeat and record the aggregate.

    Parameters
    ----------
    cfg : ExperimentConfig
    graph : Graph, optional
        Preloaded graph (split and scenario applied), by default loaded
        with :func:`load_dataset`.
    writer : ResultWriter, optional
        By default a writer for ``cfg.output_dir``.
    estimator : InfoGainEstimator, optional
        Estimator for the graph features, shared between experiments.

    Returns
    -------
    ResultRecord

    Raises
    ------
    AllRepeatsFailedError
        If training diverged for every seed.
    """
    start = time.perf_counter()
    g = graph if graph is not None else load_dataset(cfg)
    if estimator is None:
        estimator = InfoGainEstimator(g.features, cfg.sigma2)
    seeds = cfg.seed_list
    reports, failed = [], []
    for seed in seeds:
        try:
            result = train(cfg.model, replace(cfg.train, seed=seed), g)
        except DivergenceError as e:
            logger.warning("seed %d failed: %s", seed, e)
            failed.append({"seed": seed, "epoch": e.epoch, "error": str(e)})
            continue
        ev = evaluate(result.model, g, g.test_mask, result.inputs)
        reports.append(
            measure(
                cfg.model.depth,
                ev.accuracy,
                g.features,
                ev.logits,
                ev.hidden,
                g.labels,
                sigma2=cfg.sigma2,
                pair_cap=cfg.pair_cap,
                seed=seed,
                estimator=estimator,
            )
        )
    if not reports:
        raise AllRepeatsFailedError(
            f"all {len(seeds)} repeats of {cfg.model.kind} depth {cfg.model.depth} "
            f"norm {cfg.model.norm} failed"
        )
    accuracies = [r.test_accuracy for r in reports]
    record = ResultRecord(
        dataset=cfg.dataset_name,
        dataset_format=cfg.dataset_format,
        model=cfg.model.kind,
        depth=cfg.model.depth,
        hidden=cfg.model.hidden,
        norm=cfg.model.norm,
        groups=cfg.model.groups,
        lam=cfg.model.lam,
        scenario=cfg.scenario,
        repeats=len(seeds),
        seeds=seeds,
        acc_mean=float(np.mean(accuracies)),
        acc_std=float(np.std(accuracies)),
        g_ins=_mean([r.g_ins for r in reports]),
        r_group=_mean([r.r_group for r in reports]),
        intra_group=_mean([r.intra_group for r in reports]),
        pair_sample_size=max(r.pair_sample_size for r in reports),
        failed_repeats=failed,
        seconds=time.perf_counter() - start,
        accuracies=accuracies,
        metrics=[r.to_dict() for r in reports],
        config=cfg.to_dict(),
    )
    if writer is None:
        writer = ResultWriter(cfg.output_dir)
    writer.write(record)
    logger.info(
        "%s K=%d norm=%s: acc %.4f +/- %.4f",
        record.model,
        record.depth,
        record.norm,
        record.acc_mean,
        record.acc_std,
    )
    return record


def tune_lambda(cfg, graph, candidates=LAMBDA_CANDIDATES, epochs=None):
    """Pick the DGN balancing factor with the best validation accuracy.

    One short run per candidate is trained with the first seed of ``cfg``.
    Ties go to the smaller candidate.

    Parameters
    ----------
    cfg : ExperimentConfig
    graph : Graph
    candidates : sequence of float, optional
    epochs : int, optional
        Maximum epochs per run, by default ``cfg.tune_epochs``.

    Returns
    -------
    float
    """
    epochs = cfg.tune_epochs if epochs is None else epochs
    train_cfg = replace(
        cfg.train,
        seed=cfg.seed_list[0],
        max_epochs=epochs,
        patience=min(cfg.train.patience, epochs),
    )
    best, best_acc = None, -np.inf
    for lam in sorted(candidates):
        try:
            result = train(replace(cfg.model, lam=lam), train_cfg, graph)
        except DivergenceError as e:
            logger.warning("lambda %g failed: %s", lam, e)
            continue
        acc = result.history.best_val_accuracy
        logger.debug("lambda %g: val acc %.4f", lam, acc)
        if acc > best_acc:
            best, best_acc = lam, acc
    if best is None:
        raise AllRepeatsFailedError("every lambda candidate diverged")
    logger.info("tuned lambda %g (val acc %.4f)", best, best_acc)
    return best


@dataclass
class SweepResult:
    """Outcome of a sweep.

    Attributes
    ----------
    curves : pandas.DataFrame
        One row per successful cell with the columns of curves.csv.
    best : pandas.DataFrame
        Best depth per (norm, G, lambda) with the DGN improvement.
    records : list of ResultRecord
        One record per distinct run.
    failures : list of dict
        Cells whose repeats all failed.
    """

    curves: pd.DataFrame
    best: pd.DataFrame
    records: list
    failures: list


def best_depths(curves):
    """Depth with the highest mean accuracy per (norm, G, lambda).

    Ties go to the smaller depth.
    """
    columns = ["norm", "G", "lambda", "K", "acc_mean"]
    if curves.empty:
        return pd.DataFrame(columns=columns)
    idx = curves.groupby(["norm", "G", "lambda"], sort=True)["acc_mean"].idxmax()
    return curves.loc[idx, columns].reset_index(drop=True)


def improvement_table(best):
    """Gain of the best DGN configuration over every other normalizer.

    ``improvement_abs`` is the gain in percentage points and
    ``improvement_rel`` the gain relative to the other normalizer's
    accuracy, in percent. Both are nan on DGN rows and when no DGN row
    exists.
    """
    table = best.copy()
    table["improvement_abs"] = np.nan
    table["improvement_rel"] = np.nan
    dgn = table.loc[table["norm"] == "dgn", "acc_mean"]
    if not dgn.empty:
        other = table["norm"] != "dgn"
        gain = dgn.max() - table.loc[other, "acc_mean"]
        table.loc[other, "improvement_abs"] = 100 * gain
        table.loc[other, "improvement_rel"] = 100 * gain / table.loc[other, "acc_mean"]
    return table[BEST_COLUMNS]


def sweep(
    base_cfg,
    k_list,
    norm_list,
    group_list=None,
    lambda_list=None,
    jobs=1,
    tune=False,
    graph=None,
    show_progress=False,
):
    """Run every combination of depth, normalizer, group count and lambda.

    Group count and lambda only affect DGN, so other normalizers are run
    once per depth and their result is repeated over the (G, lambda) cells.

    Parameters
    ----------
    base_cfg : ExperimentConfig
    k_list : list of int
    norm_list : list of str
    group_list : list of int, optional
        By default the group count of ``base_cfg``.
    lambda_list : list of float, optional
        By default the lambda of ``base_cfg``.
    jobs : int, optional
        Number of worker threads, by default 1. Requires tqdm when larger.
    tune : bool, optional
        Replace ``lambda_list`` by the value chosen with :func:`tune_lambda`
        for every (K, G), by default False
    graph : Graph, optional
        Preloaded graph.
    show_progress : bool, optional
        Show a progress bar, by default False

    Returns
    -------
    SweepResult
        Also written to curves.csv and best_depths.csv in the output
        directory. Cells whose repeats all fail, or that raise a parameter
        or shape error, are listed in ``failures``.

    Raises
    ------
    ConfigError
        If any cell of the grid is an invalid model configuration. Nothing
        is trained in that case.
    """
    group_list = list(group_list or [base_cfg.model.groups])
    lambda_list = list(lambda_list or [base_cfg.model.lam])
    if not k_list or not norm_list:
        raise ConfigError("sweep needs at least one depth and one normalizer")
    for k, norm, groups, lam in product(k_list, norm_list, group_list, lambda_list):
        _cell_config(base_cfg, k, norm, groups, lam)
    g = graph if graph is not None else load_dataset(base_cfg)
    estimator = InfoGainEstimator(g.features, base_cfg.sigma2)
    writer = ResultWriter(base_cfg.output_dir)

    cells = []
    for k, norm, groups in product(k_list, norm_list, group_list):
        if norm == "dgn" and tune:
            cfg = _cell_config(base_cfg, k, norm, groups, lambda_list[0])
            lams = [tune_lambda(cfg, g)]
        else:
            lams = lambda_list
        for lam in lams:
            cells.append((k, norm, groups, lam))

    runs = {}
    for cell in cells:
        runs.setdefault(_run_key(cell), cell)

    def run_cell(cell):
        k, norm, groups, lam = cell
        cfg = _cell_config(base_cfg, k, norm, groups, lam)
        try:
            return run_experiment(cfg, graph=g, writer=writer, estimator=estimator)
        except (AllRepeatsFailedError, ParameterError, ShapeError) as e:
            logger.error("cell K=%d norm=%s G=%d lambda=%g failed: %s", *cell, e)
            return None

    keys = list(runs)
    parallel, thread_map, tqdm = check_tqdm_parallel(jobs > 1)
    if parallel:
        outcomes = thread_map(
            run_cell,
            [runs[key] for key in keys],
            max_workers=jobs,
            tqdm_class=tqdm,
            disable=not show_progress,
        )
    else:
        outcomes = [run_cell(runs[key]) for key in keys]
    results = dict(zip(keys, outcomes, strict=True))

    rows, failures = [], []
    for cell in cells:
        record = results[_run_key(cell)]
        k, norm, groups, lam = cell
        if record is None:
            failures.append({"K": k, "norm": norm, "G": groups, "lambda": lam})
            continue
        rows.append(
            {
                "K": k,
                "norm": norm,
                "G": groups,
                "lambda": lam,
                "acc_mean": record.acc_mean,
                "acc_std": record.acc_std,
                "g_ins": record.g_ins,
                "r_group": record.r_group,
                "intra_group": record.intra_group,
                "seconds": record.seconds,
            }
        )
    curves = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    best = improvement_table(best_depths(curves))
    output = Path(base_cfg.output_dir)
    curves.to_csv(output / "curves.csv", index=False)
    best.to_csv(output / "best_depths.csv", index=False)
    for norm, part in best.groupby("norm"):
        top = part.loc[part["acc_mean"].idxmax()]
        logger.info("best depth for %s: K=%d (acc %.4f)", norm, top["K"], top["acc_mean"])
    records = [r for r in outcomes if r is not None]
    return SweepResult(curves, best, records, failures)


def _run_key(cell):
    k, norm, groups, lam = cell
    return (k, norm, groups, lam) if norm == "dgn" else (k, norm)


def _cell_config(base_cfg, k, norm, groups, lam):
    model = replace(base_cfg.model, depth=k, norm=norm, groups=groups, lam=lam)
    return replace(base_cfg, model=model)


def groups_used(assignments):
    """Number of groups that are the most likely group of at least one node."""
    assignments = np.asarray(assignments)
    return int(np.unique(np.argmax(assignments, axis=1)).size)


def export_embeddings(model, g, path, inputs=None):
    """Write the hidden embeddings and, for DGN models, the group data.

    Files written to directory ``path``:

    embeddings.csv
        ``node_id, label, h0, ..., h{d-1}`` for the last hidden representation.
    group_means.csv
        ``group_id, m0, ..., m{d-1}``, running group means of the last DGN
        layer.
    assignments.csv
        ``node_id, s0, ..., s{G-1}``, soft group assignments of that layer.

    Parameters
    ----------
    model : Model
        Trained model; it is put in evaluation mode.
    g : Graph
    path : str or path-like
        Output directory.
    inputs : tuple, optional
        ``model.inputs(g)``.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    a, x = inputs if inputs is not None else model.inputs(g)
    model.eval()
    with no_grad():
        _, hidden = model(a, x, record=True)
    hidden = hidden.data
    frame = pd.DataFrame(hidden, columns=[f"h{i}" for i in range(hidden.shape[1])])
    frame.insert(0, "label", g.labels)
    frame.insert(0, "node_id", np.arange(g.n))
    frame.to_csv(path / "embeddings.csv", index=False, float_format="%.9g")

    positions = [i for i, n in enumerate(model.normalizers) if isinstance(n, DgnLayer)]
    if not positions:
        return
    last = positions[-1]
    layer = model.normalizers[last]
    with no_grad():
        s = dgn_assign(layer, model.trace[last]).data
    means = pd.DataFrame(
        layer.running_mean, columns=[f"m{i}" for i in range(layer.running_mean.shape[1])]
    )
    means.insert(0, "group_id", np.arange(layer.groups))
    means.to_csv(path / "group_means.csv", index=False, float_format="%.9g")
    assignments = pd.DataFrame(s, columns=[f"s{i}" for i in range(s.shape[1])])
    assignments.insert(0, "node_id", np.arange(g.n))
    assignments.to_csv(path / "assignments.csv", index=False, float_format="%.9g")
    logger.info("%d of %d groups in use", groups_used(s), layer.groups)
