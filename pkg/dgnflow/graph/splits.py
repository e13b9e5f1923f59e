from typing import NamedTuple

import numpy as np

from dgnflow.errors import ParameterError

__all__ = ["Split", "generate_split", "mask_features"]


class Split(NamedTuple):
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def generate_split(g, per_class=20, n_val=500, n_test=1000, seed=0):
    """Seed-deterministic per-class train split plus validation and test sets.

    Nodes are shuffled once with ``seed``. For every class the first
    ``per_class`` shuffled members form the training set; the next ``n_val``
    of the remaining shuffled nodes form the validation set and the
    following ``n_test`` the test set.

    Parameters
    ----------
    g : Graph
    per_class : int, optional
        Training nodes per class, by default 20
    n_val : int, optional
        Validation nodes, by default 500
    n_test : int, optional
        Test nodes, by default 1000
    seed : int, optional
        Seed of the shuffle, by default 0

    Returns
    -------
    Split
        Boolean train, val and test masks.

    Raises
    ------
    ParameterError
        If a class has fewer than ``per_class`` members or the requested
        sizes exceed the number of nodes.
    """
    if min(per_class, n_val, n_test) < 0:
        raise ParameterError("split sizes must be non-negative")
    n = g.n
    needed = per_class * g.n_classes + n_val + n_test
    if needed > n:
        raise ParameterError(f"split needs {needed} nodes, graph has {n}")
    order = np.random.default_rng(seed).permutation(n)
    shuffled_labels = g.labels[order]
    train = np.zeros(n, dtype=bool)
    for c in range(g.n_classes):
        members = order[shuffled_labels == c]
        if members.size < per_class:
            name = g.class_names[c] if c < len(g.class_names) else c
            raise ParameterError(
                f"class {name} has {members.size} nodes, fewer than "
                f"per_class={per_class}"
            )
        train[members[:per_class]] = True
    remaining = order[~train[order]]
    val = np.zeros(n, dtype=bool)
    test = np.zeros(n, dtype=bool)
    val[remaining[:n_val]] = True
    test[remaining[n_val : n_val + n_test]] = True
    return Split(train, val, test)


def mask_features(g):
    """Copy of ``g`` with the features of validation and test nodes set to zero."""
    hidden = g.val_mask | g.test_mask
    if not hidden.any():
        return g.with_features(g.features.copy())
    features = g.features.copy()
    features[hidden] = 0
    return g.with_features(features)
