"""Runs on the Cora citation graph.

Set ``DGNFLOW_CORA`` to the directory holding ``cora.content`` and
``cora.cites`` to run these.
"""

import os

import pytest

from dgnflow.experiment import ExperimentConfig, load_dataset, run_experiment, sweep

pytestmark = pytest.mark.slow

CORA = os.environ.get("DGNFLOW_CORA")


@pytest.fixture(scope="module")
def cora():
    if not CORA:
        pytest.skip("DGNFLOW_CORA is not set")
    cfg = ExperimentConfig.from_dict({"dataset": CORA, "dataset_name": "cora"})
    return load_dataset(cfg)


def cora_config(tmp_path, model, repeats=1, **extra):
    return ExperimentConfig.from_dict(
        {
            "dataset": CORA,
            "dataset_name": "cora",
            "model": model,
            "repeats": repeats,
            "output_dir": str(tmp_path),
            **extra,
        }
    )


def run(cora, tmp_path, **model):
    return run_experiment(cora_config(tmp_path, model), graph=cora)


def test_cora_split(cora):
    assert cora.n == 2708
    assert cora.n_classes == 7
    assert cora.train_mask.sum() == 140
    assert cora.val_mask.sum() == 500
    assert cora.test_mask.sum() == 1000


def test_shallow_gcn(cora, tmp_path):
    plain = run(cora, tmp_path, kind="gcn", depth=2)
    dgn = run(cora, tmp_path, kind="gcn", depth=2, norm="dgn")
    assert 0.792 <= plain.acc_mean <= 0.852
    assert abs(dgn.acc_mean - plain.acc_mean) <= 0.015


def test_sgc_oversmooths(cora, tmp_path):
    shallow = run(cora, tmp_path, kind="sgc", depth=5)
    deep = run(cora, tmp_path, kind="sgc", depth=30)
    assert deep.acc_mean <= shallow.acc_mean - 0.15
    assert deep.g_ins < shallow.g_ins
    assert deep.r_group < shallow.r_group


def test_sgc_dgn_keeps_accuracy(cora, tmp_path):
    assert 0.749 <= run(cora, tmp_path, kind="sgc", depth=5, norm="dgn").acc_mean <= 0.809
    plain = run(cora, tmp_path, kind="sgc", depth=20)
    dgn = run(cora, tmp_path, kind="sgc", depth=20, norm="dgn")
    assert dgn.acc_mean >= plain.acc_mean + 0.15


def test_missing_features(cora, tmp_path):
    cfg = cora_config(tmp_path, {"kind": "gcn"}, scenario="missing_features")
    graph = load_dataset(cfg)
    result = sweep(cfg, [2, 4, 6, 8, 10, 15, 20], ["none", "dgn"], graph=graph)
    best = result.best.set_index("norm")
    assert best.loc["dgn", "acc_mean"] >= best.loc["none", "acc_mean"] + 0.10
    assert best.loc["dgn", "K"] >= 10
