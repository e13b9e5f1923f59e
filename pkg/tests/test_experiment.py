import json
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pandas as pd
import pytest

from dgnflow import experiment
from dgnflow.errors import (
    AllRepeatsFailedError,
    ConfigError,
    DivergenceError,
    ParameterError,
)
from dgnflow.experiment import (
    CURVE_COLUMNS,
    LAMBDA_CANDIDATES,
    RESULT_COLUMNS,
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
from dgnflow.training import ModelConfig, TrainConfig, train

FAST = TrainConfig(
    learning_rate=0.05, weight_decay=5e-4, dropout=0.0, max_epochs=10, patience=10
)


def config(path, tmp_path, **kwargs):
    kwargs.setdefault("model", ModelConfig("gcn", depth=2, hidden=8, groups=2))
    kwargs.setdefault("train", FAST)
    kwargs.setdefault("repeats", 2)
    return ExperimentConfig(
        dataset=str(path),
        dataset_format="generic",
        output_dir=str(tmp_path / "out"),
        **kwargs,
    )


def test_config_presets():
    cfg = ExperimentConfig.from_dict({"dataset": "data/cora"})
    assert cfg.dataset_name == "cora"
    assert cfg.model.groups == 10
    assert cfg.train.learning_rate == 5e-3
    assert cfg.train.weight_decay == 5e-4
    assert cfg.train.dropout == 0.6
    assert cfg.split == SplitConfig(20, 500, 1000)

    cfg = ExperimentConfig.from_dict(
        {"dataset": "data/pubmed", "model": {"groups": 3}, "train": {"dropout": 0.1}}
    )
    assert cfg.model.groups == 3
    assert cfg.train.learning_rate == 1e-2
    assert cfg.train.weight_decay == 1e-3
    assert cfg.train.dropout == 0.1

    cfg = ExperimentConfig.from_dict({"dataset": "data/CoauthorCS.content"})
    assert cfg.split == SplitConfig(40, 2250, 15483)


def test_config_without_preset():
    cfg = ExperimentConfig.from_dict({"dataset": "data/mygraph", "model": {"kind": "sgc"}})
    assert cfg.dataset_name == "mygraph"
    assert cfg.split is None
    assert cfg.model == ModelConfig("sgc")
    assert cfg.train == TrainConfig()


def test_config_seeds():
    cfg = ExperimentConfig("x", repeats=3)
    assert cfg.seed_list == [0, 1, 2]
    cfg = ExperimentConfig("x", seeds=[7, 3])
    assert cfg.repeats == 2
    assert cfg.seed_list == [7, 3]


@pytest.mark.parametrize(
    ("data", "match"),
    [
        ({"dataset": "x", "modle": {}}, "unknown key 'modle' in 'config'"),
        ({"dataset": "x", "model": {"depht": 2}}, "unknown key 'depht' in 'model'"),
        ({"dataset": "x", "train": {"lr": 0.1}}, "unknown key 'lr' in 'train'"),
        ({"dataset": "x", "split": {"val": 3}}, "unknown key 'val' in 'split'"),
        ({"model": {}}, "missing key 'dataset'"),
        ({"dataset": "x", "model": []}, "'model' must be an object"),
        ({"dataset": "x", "model": {"depth": 0}}, "depth"),
        ({"dataset": "x", "repeats": 0}, "repeats"),
        ({"dataset": "x", "scenario": "inductive"}, "scenario"),
        ({"dataset": "x", "sigma2": -1.0}, "sigma2"),
    ],
)
def test_config_errors(data, match):
    with pytest.raises(ConfigError, match=match):
        ExperimentConfig.from_dict(data)


def test_config_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(
        json.dumps({"dataset": "data/citeseer", "model": {"kind": "gat", "depth": 4}}),
        encoding="utf-8",
    )
    cfg = ExperimentConfig.from_json(path)
    assert cfg.model.kind == "gat"
    assert cfg.model.depth == 4
    assert cfg.to_dict()["model"]["depth"] == 4
    path.write_text("{\n  'dataset': 1\n}", encoding="utf-8")
    with pytest.raises(ConfigError, match=":2:"):
        ExperimentConfig.from_json(path)


def test_load_generic_dataset(generic_dataset, tmp_path, block_graph):
    g = load_dataset(config(generic_dataset, tmp_path))
    assert g.n == block_graph.n
    assert np.array_equal(g.test_mask, block_graph.test_mask)
    assert g.name == "blocks"


def test_load_missing_features(generic_dataset, tmp_path, block_graph):
    g = load_dataset(config(generic_dataset, tmp_path, scenario="missing_features"))
    hidden = g.val_mask | g.test_mask
    assert (g.features[hidden] == 0).all()
    assert np.array_equal(g.features[g.train_mask], block_graph.features[g.train_mask])


def test_load_content_cites_directory(tmp_path):
    data = tmp_path / "toy"
    data.mkdir()
    (data / "toy.content").write_text(
        "".join(f"{i} {i % 2} {1 - i % 2} {'AB'[i % 2]}\n" for i in range(10)),
        encoding="utf-8",
    )
    (data / "toy.cites").write_text(
        "".join(f"{i} {i + 2}\n" for i in range(8)), encoding="utf-8"
    )
    cfg = ExperimentConfig(
        str(data), split=SplitConfig(per_class=2, n_val=2, n_test=3, seed=1)
    )
    g = load_dataset(cfg)
    assert g.n == 10
    assert g.train_mask.sum() == 4
    assert g.val_mask.sum() == 2
    assert g.test_mask.sum() == 3
    with pytest.raises(FileNotFoundError):
        load_dataset(replace(cfg, dataset=str(tmp_path)))


def test_run_experiment_writes_results(generic_dataset, tmp_path):
    cfg = config(generic_dataset, tmp_path)
    record = run_experiment(cfg)
    assert record.repeats == 2
    assert record.seeds == [0, 1]
    assert len(record.accuracies) == 2
    assert np.isclose(record.acc_mean, np.mean(record.accuracies))
    assert record.failed_repeats == []
    assert record.g_ins >= 0
    assert record.r_group > 0
    assert record.lam == cfg.model.lam

    run_experiment(cfg)
    out = tmp_path / "out"
    frame = pd.read_csv(out / "results.csv")
    assert list(frame.columns) == RESULT_COLUMNS
    assert len(frame) == 2
    lines = (out / "results.jsonl").read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    payload = json.loads(lines[0])
    assert payload["lambda"] == cfg.model.lam
    assert payload["config"]["model"]["kind"] == "gcn"
    assert len(payload["metrics"]) == 2


def test_run_experiment_is_deterministic(generic_dataset, tmp_path):
    cfg = config(generic_dataset, tmp_path, train=replace(FAST, dropout=0.5))
    first = run_experiment(cfg)
    second = run_experiment(cfg)
    assert first.accuracies == second.accuracies
    assert first.g_ins == second.g_ins
    assert first.r_group == second.r_group
    path = tmp_path / "out" / "results.jsonl"
    payloads = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    for payload in payloads:
        payload.pop("seconds")
    assert payloads[0] == payloads[1]


def test_run_experiment_partial_failure(generic_dataset, tmp_path, monkeypatch):
    def flaky(model_cfg, train_cfg, g):
        if train_cfg.seed == 0:
            raise DivergenceError(3, float("nan"))
        return train(model_cfg, train_cfg, g)

    monkeypatch.setattr(experiment, "train", flaky)
    record = run_experiment(config(generic_dataset, tmp_path))
    assert len(record.accuracies) == 1
    assert record.failed_repeats[0]["seed"] == 0
    assert record.failed_repeats[0]["epoch"] == 3
    assert record.to_row()["failed_repeats"] == 1


def test_run_experiment_all_failed(generic_dataset, tmp_path, monkeypatch):
    def diverge(model_cfg, train_cfg, g):
        raise DivergenceError(1, float("inf"))

    monkeypatch.setattr(experiment, "train", diverge)
    with pytest.raises(AllRepeatsFailedError):
        run_experiment(config(generic_dataset, tmp_path))


def test_result_record_nan_is_null():
    record = ResultRecord(
        "d", "generic", "sgc", 2, 16, "none", 10, 0.01, "attributed", 1, [0],
        0.5, 0.0, 0.1, float("nan"), 0.2, 0, [], 1.0,
    )  # fmt: skip
    assert json.loads(record.to_json())["r_group"] is None
    assert record.to_row()["seeds"] == "0"


def test_single_cell_sweep_matches_run(generic_dataset, tmp_path):
    cfg = config(generic_dataset, tmp_path, repeats=1)
    result = sweep(cfg, [2], ["none"])
    assert list(result.curves.columns) == CURVE_COLUMNS
    assert len(result.curves) == 1
    record = run_experiment(cfg)
    assert result.curves["acc_mean"].iloc[0] == record.acc_mean
    assert result.curves["r_group"].iloc[0] == record.r_group
    assert (tmp_path / "out" / "curves.csv").exists()
    assert (tmp_path / "out" / "best_depths.csv").exists()


def test_sweep_grid(generic_dataset, tmp_path):
    cfg = config(generic_dataset, tmp_path, repeats=1)
    result = sweep(cfg, [1, 2], ["none", "dgn"], group_list=[2], lambda_list=[0.01, 0.1])
    curves = result.curves
    assert len(curves) == 8
    assert len(result.records) == 6
    assert result.failures == []
    # non-DGN results are shared across the (G, lambda) cells
    none = curves[curves["norm"] == "none"]
    for k in (1, 2):
        assert none.loc[none["K"] == k, "acc_mean"].nunique() == 1
    assert len(pd.read_csv(tmp_path / "out" / "results.csv")) == 6
    saved = pd.read_csv(tmp_path / "out" / "curves.csv")
    assert len(saved) == 8
    best = result.best
    assert len(best) == 4
    assert best.loc[best["norm"] == "dgn", "improvement_abs"].isna().all()
    assert best.loc[best["norm"] == "none", "improvement_abs"].notna().all()


def test_sweep_parallel_matches_serial(generic_dataset, tmp_path):
    pytest.importorskip("tqdm")
    serial = sweep(config(generic_dataset, tmp_path / "a", repeats=1), [1, 2], ["none", "pair"])
    parallel = sweep(
        config(generic_dataset, tmp_path / "b", repeats=1), [1, 2], ["none", "pair"], jobs=2
    )
    columns = ["K", "norm", "acc_mean", "g_ins", "r_group"]
    pd.testing.assert_frame_equal(serial.curves[columns], parallel.curves[columns])


def test_sweep_reports_failures(generic_dataset, tmp_path, monkeypatch):
    def diverge(model_cfg, train_cfg, g):
        raise DivergenceError(1, float("nan"))

    monkeypatch.setattr(experiment, "train", diverge)
    result = sweep(config(generic_dataset, tmp_path, repeats=1), [1, 2], ["none"])
    assert result.curves.empty
    assert result.records == []
    assert result.failures == [
        {"K": 1, "norm": "none", "G": 2, "lambda": 0.01},
        {"K": 2, "norm": "none", "G": 2, "lambda": 0.01},
    ]


def test_sweep_rejects_invalid_cells_before_training(generic_dataset, tmp_path):
    cfg = config(generic_dataset, tmp_path, repeats=1)
    with pytest.raises(ConfigError):
        sweep(cfg, [2, 0], ["none"])
    assert not (tmp_path / "out" / "results.jsonl").exists()


def test_sweep_continues_after_cell_error(generic_dataset, tmp_path, monkeypatch):
    run = experiment.run_experiment

    def fail_depth_one(cfg, **kwargs):
        if cfg.model.depth == 1:
            raise ParameterError("bad cell")
        return run(cfg, **kwargs)

    monkeypatch.setattr(experiment, "run_experiment", fail_depth_one)
    result = sweep(config(generic_dataset, tmp_path, repeats=1), [1, 2], ["none"])
    assert result.curves["K"].tolist() == [2]
    assert result.failures == [{"K": 1, "norm": "none", "G": 2, "lambda": 0.01}]
    assert (tmp_path / "out" / "curves.csv").exists()


def test_sweep_needs_depths(generic_dataset, tmp_path):
    with pytest.raises(ConfigError):
        sweep(config(generic_dataset, tmp_path), [], ["none"])


def test_sweep_tuned_lambda(generic_dataset, tmp_path):
    cfg = config(generic_dataset, tmp_path, repeats=1, tune_epochs=3)
    result = sweep(cfg, [2], ["dgn"], tune=True)
    assert len(result.curves) == 1
    assert result.curves["lambda"].iloc[0] in LAMBDA_CANDIDATES


def test_tune_lambda_ties_go_to_smaller(generic_dataset, tmp_path, monkeypatch):
    calls = []

    def fake_train(model_cfg, train_cfg, g):
        calls.append((model_cfg.lam, train_cfg.max_epochs))
        return SimpleNamespace(history=SimpleNamespace(best_val_accuracy=0.5))

    monkeypatch.setattr(experiment, "train", fake_train)
    cfg = config(generic_dataset, tmp_path, model=ModelConfig(norm="dgn", groups=2))
    g = load_dataset(cfg)
    assert tune_lambda(cfg, g, candidates=[0.05, 0.001, 0.01], epochs=4) == 0.001
    assert calls == [(0.001, 4), (0.01, 4), (0.05, 4)]


def test_tune_lambda_picks_best(generic_dataset, tmp_path, monkeypatch):
    scores = {0.001: 0.4, 0.01: 0.7, 0.05: 0.6}

    def fake_train(model_cfg, train_cfg, g):
        acc = scores[model_cfg.lam]
        return SimpleNamespace(history=SimpleNamespace(best_val_accuracy=acc))

    monkeypatch.setattr(experiment, "train", fake_train)
    cfg = config(generic_dataset, tmp_path, model=ModelConfig(norm="dgn", groups=2))
    assert tune_lambda(cfg, load_dataset(cfg), candidates=list(scores)) == 0.01


def test_best_depths_ties_go_to_smaller_depth():
    curves = pd.DataFrame(
        {
            "K": [1, 2, 3, 1, 2],
            "norm": ["none", "none", "none", "dgn", "dgn"],
            "G": [10] * 5,
            "lambda": [0.01] * 5,
            "acc_mean": [0.5, 0.7, 0.7, 0.6, 0.8],
        }
    )
    best = best_depths(curves).set_index("norm")
    assert best.loc["none", "K"] == 2
    assert best.loc["dgn", "K"] == 2
    assert best.loc["dgn", "acc_mean"] == 0.8


def test_improvement_table():
    best = pd.DataFrame(
        {
            "norm": ["batch", "dgn", "none"],
            "G": [10, 10, 10],
            "lambda": [0.01, 0.01, 0.01],
            "K": [2, 8, 2],
            "acc_mean": [0.8, 0.9, 0.5],
        }
    )
    table = improvement_table(best).set_index("norm")
    assert np.isclose(table.loc["none", "improvement_abs"], 40.0)
    assert np.isclose(table.loc["none", "improvement_rel"], 80.0)
    assert np.isclose(table.loc["batch", "improvement_abs"], 10.0)
    assert np.isclose(table.loc["batch", "improvement_rel"], 12.5)
    assert np.isnan(table.loc["dgn", "improvement_abs"])
    no_dgn = improvement_table(best[best["norm"] != "dgn"])
    assert no_dgn["improvement_abs"].isna().all()


def test_groups_used():
    assert groups_used(np.array([[0.9, 0.1], [0.8, 0.2]])) == 1
    assert groups_used(np.eye(3)) == 3


def test_export_embeddings(block_graph, tmp_path):
    model_cfg = ModelConfig("sgc", depth=3, norm="dgn", groups=3, lam=0.1)
    result = train(model_cfg, FAST, block_graph)
    out = tmp_path / "export"
    export_embeddings(result.model, block_graph, out, result.inputs)

    embeddings = pd.read_csv(out / "embeddings.csv")
    assert list(embeddings.columns) == ["node_id", "label", "h0", "h1", "h2", "h3"]
    assert embeddings["node_id"].tolist() == list(range(block_graph.n))
    assert np.array_equal(embeddings["label"], block_graph.labels)
    means = pd.read_csv(out / "group_means.csv")
    assert means["group_id"].tolist() == [0, 1, 2]
    assignments = pd.read_csv(out / "assignments.csv")
    assert list(assignments.columns) == ["node_id", "s0", "s1", "s2"]
    sums = assignments[["s0", "s1", "s2"]].sum(axis=1)
    assert np.allclose(sums, 1.0, atol=1e-6)

    first = {p.name: p.read_bytes() for p in out.iterdir()}
    export_embeddings(result.model, block_graph, out, result.inputs)
    assert {p.name: p.read_bytes() for p in out.iterdir()} == first


def test_export_without_dgn(block_graph, tmp_path):
    result = train(ModelConfig("gcn", depth=2, hidden=8), FAST, block_graph)
    export_embeddings(result.model, block_graph, tmp_path)
    assert (tmp_path / "embeddings.csv").exists()
    assert not (tmp_path / "assignments.csv").exists()
    assert pd.read_csv(tmp_path / "embeddings.csv").shape == (block_graph.n, 2 + 8)
