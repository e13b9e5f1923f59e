import numpy as np
import pytest

from dgnflow.autodiff import Tensor, grad_check
from dgnflow.errors import ConfigError, DivergenceError, ParameterError, ShapeError
from dgnflow.graph import Graph, build_adjacency
from dgnflow.training import (
    Adam,
    AdamState,
    ModelConfig,
    TrainConfig,
    adam_step,
    build_model,
    evaluate,
    masked_cross_entropy,
    train,
)


FAST = {"learning_rate": 0.05, "weight_decay": 5e-4, "dropout": 0.0}


def test_cross_entropy_uniform_logits():
    logits = Tensor(np.zeros((3, 7)))
    loss = masked_cross_entropy(logits, [0, 3, 6], np.ones(3, dtype=bool))
    assert np.isclose(loss.item(), np.log(7))


def test_cross_entropy_confident_logits():
    logits = Tensor(np.array([[1000.0, 0.0, 0.0], [0.0, 0.0, 1000.0]]))
    loss = masked_cross_entropy(logits, [0, 2], np.ones(2, dtype=bool))
    assert np.isfinite(loss.item())
    assert loss.item() < 1e-12


def test_cross_entropy_grad_check():
    logits = np.random.default_rng(0).normal(size=(5, 3))
    labels = np.array([0, 2, 1, 1, 0])
    mask = np.array([True, True, False, True, True])
    assert grad_check(lambda t: masked_cross_entropy(t, labels, mask), logits) < 1e-6


def test_cross_entropy_errors():
    logits = Tensor(np.zeros((3, 2)))
    with pytest.raises(ParameterError):
        masked_cross_entropy(logits, [0, 1, 0], np.zeros(3, dtype=bool))
    with pytest.raises(ShapeError):
        masked_cross_entropy(logits, [0, 1, 0], np.ones(4, dtype=bool))


def test_adam_first_step():
    p = np.array([[1.0, -2.0, 0.5]])
    g = np.array([[0.3, -4.0, 1e-3]])
    (new,), _ = adam_step([p], [g], AdamState.zeros([p]), lr=0.01, t=1)
    assert np.allclose(np.abs(new - p), 0.01, atol=1e-6)
    assert np.array_equal(np.sign(new - p), -np.sign(g))


def test_adam_zero_gradient():
    p = np.array([[1.0, -2.0]])
    (new,), _ = adam_step([p], [np.zeros_like(p)], AdamState.zeros([p]), lr=0.1)
    assert np.array_equal(new, p)


def test_adam_weight_decay_shrinks():
    p = np.array([[1.0, -2.0]])
    state = AdamState.zeros([p])
    values = [p]
    for t in range(1, 4):
        values, state = adam_step(
            values, [np.zeros_like(p)], state, lr=0.1, weight_decay=0.1, t=t
        )
    assert (np.abs(values[0]) < np.abs(p)).all()
    assert np.array_equal(np.sign(values[0]), np.sign(p))


def test_adam_step_errors():
    p = np.ones((2, 2))
    with pytest.raises(ParameterError):
        adam_step([p], [p], AdamState.zeros([p]), lr=0.1, t=0)
    with pytest.raises(ShapeError):
        adam_step([p], [np.ones((2, 3))], AdamState.zeros([p]), lr=0.1)


def test_adam_optimizer_updates_tensors():
    w = Tensor(np.array([[1.0, 1.0]]), requires_grad=True)
    frozen = Tensor(np.array([[5.0]]), requires_grad=True)
    optimizer = Adam([w, frozen], lr=0.5)
    w.grad = np.array([[1.0, -1.0]])
    optimizer.step()
    assert np.allclose(w.data, [[0.5, 1.5]])
    assert np.array_equal(frozen.data, [[5.0]])
    optimizer.zero_grad()
    assert w.grad is None


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(kind="mlp")
    with pytest.raises(ConfigError):
        ModelConfig(depth=0)
    with pytest.raises(ConfigError):
        ModelConfig(norm="dgn", groups=0)
    with pytest.raises(ConfigError):
        ModelConfig(lam=-0.1)
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(dropout=1.0)
    with pytest.raises(ConfigError):
        TrainConfig(max_epochs=10, patience=20)
    with pytest.raises(ConfigError):
        TrainConfig(dtype="float16")


def test_build_model():
    model = build_model(
        ModelConfig("gat", depth=3, hidden=8, norm="dgn", groups=4),
        TrainConfig(dropout=0.2, dtype="float64"),
        n_features=5,
        n_classes=3,
    )
    assert model.kind == "gat"
    assert model.dropout == 0.2
    assert model.dtype == np.float64
    assert [n.groups for n in model.dgn_layers()] == [4, 4]


@pytest.mark.parametrize("kind", ["gcn", "gat", "sgc"])
def test_train_learns_block_graph(kind, block_graph):
    g = block_graph
    cfg = TrainConfig(max_epochs=100, patience=100, **FAST)
    result = train(ModelConfig(kind, depth=2, hidden=8), cfg, g)
    assert evaluate(result.model, g, g.test_mask).accuracy >= 0.9


@pytest.mark.parametrize("norm", ["batch", "pair", "dgn"])
def test_train_with_normalization(norm, block_graph):
    g = block_graph
    cfg = TrainConfig(max_epochs=60, patience=60, **FAST)
    result = train(ModelConfig("gcn", depth=3, hidden=8, norm=norm, groups=2), cfg, g)
    assert np.isfinite(result.history.train_loss).all()
    assert result.history.train_loss[-1] < result.history.train_loss[0]


def test_early_stopping_restores_best_epoch(block_graph):
    g = block_graph
    cfg = TrainConfig(max_epochs=200, patience=5, **FAST)
    result = train(ModelConfig("gcn", depth=2, hidden=8), cfg, g)
    history = result.history
    assert len(history) < 200
    assert len(history) == history.best_epoch + 5
    assert history.best_val_accuracy == max(history.val_accuracy)
    assert history.val_accuracy[history.best_epoch - 1] == history.best_val_accuracy
    restored = evaluate(result.model, g, g.val_mask, result.inputs).accuracy
    assert restored == history.best_val_accuracy


def test_training_is_deterministic(block_graph):
    g = block_graph
    cfg = TrainConfig(max_epochs=15, patience=15, dropout=0.5, seed=3)
    model_cfg = ModelConfig("gcn", depth=3, hidden=8, norm="dgn", groups=2)
    first = train(model_cfg, cfg, g)
    second = train(model_cfg, cfg, g)
    assert first.history.train_loss == second.history.train_loss
    assert first.history.val_accuracy == second.history.val_accuracy
    a = evaluate(first.model, g, g.test_mask)
    b = evaluate(second.model, g, g.test_mask)
    assert np.array_equal(a.logits, b.logits)


def test_zero_epochs_returns_initial_model(block_graph):
    g = block_graph
    result = train(ModelConfig(), TrainConfig(max_epochs=0, patience=0), g)
    assert len(result.history) == 0
    assert result.history.best_epoch == 0
    fresh = build_model(ModelConfig(), TrainConfig(max_epochs=0, patience=0), 4, 2)
    for p, q in zip(result.model.parameters(), fresh.parameters(), strict=True):
        assert np.array_equal(p.data, q.data)


def test_without_validation_nodes_keeps_last_epoch(block_graph):
    g = block_graph
    g = g.with_masks(g.train_mask, None, g.test_mask)
    result = train(ModelConfig(), TrainConfig(max_epochs=12, patience=3), g)
    assert len(result.history) == 12
    assert result.history.best_epoch == 12
    assert np.isnan(result.history.val_accuracy).all()


def test_missing_class_warns(block_graph):
    g = block_graph
    train_mask = g.train_mask & (g.labels == 0)
    g = g.with_masks(train_mask, g.val_mask, g.test_mask)
    with pytest.warns(UserWarning, match=r"classes \[1\]"):
        train(ModelConfig(), TrainConfig(max_epochs=2, patience=2), g)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_names_epoch(block_graph):
    g = block_graph
    features = g.features.copy()
    features[0, 0] = np.inf
    g = g.with_features(features)
    with pytest.raises(DivergenceError, match="epoch 1"):
        train(ModelConfig(), TrainConfig(max_epochs=5, patience=5, dropout=0.0), g)


def test_history_frame(block_graph):
    g = block_graph
    result = train(ModelConfig(), TrainConfig(max_epochs=4, patience=4), g)
    frame = result.history.to_frame()
    assert list(frame.columns) == ["train_loss", "train_accuracy", "val_accuracy"]
    assert frame.index.tolist() == [1, 2, 3, 4]


def test_evaluate_perfect_memorization():
    n = 6
    features = np.eye(3)[np.arange(n) % 3] * 2.0
    g = Graph(build_adjacency(n, [], []), features, np.arange(n) % 3)
    model = build_model(ModelConfig("sgc", depth=1), TrainConfig(dtype="float64"), 3, 3)
    model.classifier.weight.data = np.eye(3)
    assert evaluate(model, g, np.ones(n, dtype=bool)).accuracy == 1.0


def test_evaluate_untrained_is_chance():
    rng = np.random.default_rng(1)
    n = 1000
    sources = rng.integers(0, n, size=3000)
    targets = rng.integers(0, n, size=3000)
    keep = sources != targets
    g = Graph(
        build_adjacency(n, sources[keep], targets[keep]),
        rng.normal(size=(n, 10)),
        rng.integers(0, 7, size=n),
    )
    model = build_model(ModelConfig(), TrainConfig(), 10, 7)
    first = evaluate(model, g, np.ones(n, dtype=bool))
    assert abs(first.accuracy - 1 / 7) < 0.05
    second = evaluate(model, g, np.ones(n, dtype=bool))
    assert np.array_equal(first.logits, second.logits)
    assert first.hidden.shape == (n, 16)


def test_evaluate_empty_mask(block_graph):
    g = block_graph
    model = build_model(ModelConfig(), TrainConfig(), 4, 2)
    with pytest.raises(ParameterError):
        evaluate(model, g, np.zeros(g.n, dtype=bool))
