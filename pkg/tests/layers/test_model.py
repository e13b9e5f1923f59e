import numpy as np
import pytest

from dgnflow.autodiff import grad_check_parameters
from dgnflow.errors import ParameterError
from dgnflow.graph import Graph, build_adjacency
from dgnflow.layers import MODELS, NORMALIZERS, DgnLayer, Model
from dgnflow.training import masked_cross_entropy

SOURCES = [0, 1, 2, 3, 4, 5, 0, 2]
TARGETS = [1, 2, 3, 4, 5, 6, 3, 6]


def small_graph(n_features=5, seed=0):
    rng = np.random.default_rng(seed)
    return Graph(
        build_adjacency(7, SOURCES, TARGETS),
        rng.normal(size=(7, n_features)),
        np.array([0, 1, 2, 0, 1, 2, 0]),
    )


def model(kind, norm="none", depth=3, **kwargs):
    kwargs.setdefault("hidden", 4)
    return Model(kind, depth, 5, 3, norm=norm, groups=2, lam=0.5, **kwargs)


@pytest.mark.parametrize("kind", MODELS)
@pytest.mark.parametrize("norm", NORMALIZERS)
def test_forward_shapes(kind, norm):
    g = small_graph()
    m = model(kind, norm)
    logits, hidden = m(*m.inputs(g))
    assert logits.shape == (7, 3)
    assert hidden.shape == ((7, 5) if kind == "sgc" else (7, 4))
    assert np.isfinite(logits.data).all()
    assert logits.dtype == np.float32


def test_layer_counts():
    gcn = model("gcn", "batch", depth=4)
    assert len(gcn.layers) == 4
    assert len(gcn.normalizers) == 3
    assert gcn.classifier is None
    sgc = model("sgc", "dgn", depth=4)
    assert len(sgc.layers) == 4
    assert len(sgc.normalizers) == 4
    assert len(sgc.dgn_layers()) == 4
    assert all(isinstance(n, DgnLayer) for n in sgc.dgn_layers())


def test_single_layer_gcn_has_no_normalizer():
    m = model("gcn", "dgn", depth=1)
    g = small_graph()
    logits, hidden = m(*m.inputs(g))
    assert m.normalizers == []
    assert np.array_equal(hidden.data, m.inputs(g)[1].data)
    assert logits.shape == (7, 3)


def test_invalid_arguments():
    with pytest.raises(ParameterError):
        Model("mlp", 2, 5, 3)
    with pytest.raises(ParameterError):
        Model("gcn", 2, 5, 3, norm="layer")
    with pytest.raises(ParameterError):
        Model("gcn", 0, 5, 3)


def test_record_trace():
    g = small_graph()
    gcn = model("gcn", "pair", depth=4)
    gcn(*gcn.inputs(g), record=True)
    assert len(gcn.trace) == 3
    sgc = model("sgc", "pair", depth=4)
    sgc(*sgc.inputs(g), record=True)
    assert len(sgc.trace) == 4
    sgc(*sgc.inputs(g))
    assert sgc.trace == []


@pytest.mark.parametrize("norm", ["none", "pair"])
def test_sgc_reuses_stateless_propagation(norm):
    g = small_graph()
    m = model("sgc", norm, depth=6)
    a, x = m.inputs(g)
    _, first = m(a, x)
    _, second = m(a, x)
    assert first is second
    assert not first.requires_grad
    _, other = m(*m.inputs(g))
    assert other is not first
    assert np.array_equal(other.data, first.data)


def test_sgc_batch_norm_propagation_is_trainable():
    m = model("sgc", "batch", depth=3)
    _, hidden = m(*m.inputs(small_graph()))
    assert hidden.requires_grad


def test_eval_is_deterministic():
    g = small_graph()
    m = model("gcn", "dgn", dropout=0.5)
    a, x = m.inputs(g)
    m.train()
    m(a, x)
    m.eval()
    first, _ = m(a, x)
    second, _ = m(a, x)
    assert np.array_equal(first.data, second.data)


def test_dropout_only_in_training():
    g = small_graph()
    m = model("gcn", dropout=0.5)
    a, x = m.inputs(g)
    m.train()
    first, _ = m(a, x)
    second, _ = m(a, x)
    assert not np.array_equal(first.data, second.data)


def test_same_seed_same_model():
    g = small_graph()
    m1 = model("gat", "dgn", seed=3)
    m2 = model("gat", "dgn", seed=3)
    for p1, p2 in zip(m1.parameters(), m2.parameters(), strict=True):
        assert np.array_equal(p1.data, p2.data)
    l1, _ = m1(*m1.inputs(g))
    l2, _ = m2(*m2.inputs(g))
    assert np.array_equal(l1.data, l2.data)


def test_state_dict_round_trip():
    g = small_graph()
    m = model("gcn", "dgn")
    a, x = m.inputs(g)
    state = m.state_dict()
    assert "3.running_mean" in state
    m.eval()
    before, _ = m(a, x)

    m.train()
    for _ in range(3):
        m(a, x)
    for p in m.parameters():
        p.data = p.data + 0.1
    m.eval()
    changed, _ = m(a, x)
    assert not np.allclose(changed.data, before.data)

    m.load_state_dict(state)
    after, _ = m(a, x)
    assert np.array_equal(after.data, before.data)


def test_state_dict_is_a_copy():
    m = model("sgc", "batch")
    state = m.state_dict()
    key = next(iter(state))
    state[key] += 5.0
    assert not np.array_equal(m.state_dict()[key], state[key])


@pytest.mark.parametrize("kind", MODELS)
@pytest.mark.parametrize("norm", NORMALIZERS)
def test_model_grad_check(kind, norm):
    g = small_graph(seed=1)
    m = model(kind, norm, depth=2, dtype=np.float64, seed=2)
    a, x = m.inputs(g)
    mask = np.ones(7, dtype=bool)

    def loss():
        logits, _ = m(a, x)
        return masked_cross_entropy(logits, g.labels, mask)

    assert grad_check_parameters(loss, m.parameters(), eps=1e-5) < 1e-4
