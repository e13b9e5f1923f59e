import numpy as np
import pytest

from dgnflow.graph import Graph, build_adjacency, save_generic


def make_block_graph(n=40, seed=0, noise=0.3):
    """Two homophilous blocks with informative features.

    Nodes alternate between the classes; the first quarter trains, the
    second quarter validates and the rest is tested.
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    same = labels[:, None] == labels[None, :]
    p = np.where(same, 0.3, 0.02)
    upper = np.triu(rng.random((n, n)) < p, k=1)
    sources, targets = np.nonzero(upper)
    features = rng.normal(0.0, noise, size=(n, 4))
    features[np.arange(n), labels] += 1.0
    index = np.arange(n)
    return Graph(
        build_adjacency(n, sources, targets),
        features,
        labels,
        train_mask=index < n // 4,
        val_mask=(index >= n // 4) & (index < n // 2),
        test_mask=index >= n // 2,
    )


@pytest.fixture
def block_graph():
    return make_block_graph()


@pytest.fixture
def generic_dataset(tmp_path, block_graph):
    """Directory holding ``block_graph`` in the generic format."""
    path = tmp_path / "blocks"
    save_generic(block_graph, path)
    return path
