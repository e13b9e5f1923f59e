"""Graph data model.

A :class:`Graph` holds an undirected graph with node features, integer labels
and the train/validation/test masks of a transductive node-classification
task. A :class:`NormalizedAdjacency` holds the symmetrically normalized
adjacency with self-loops used for propagation.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from dgnflow.errors import ParameterError, ShapeError

__all__ = ["Graph", "NormalizedAdjacency"]


def _empty_mask(n):
    return np.zeros(n, dtype=bool)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected attributed graph with node labels and split masks.

    Parameters
    ----------
    adjacency : scipy.sparse.csr_matrix
        n x n binary adjacency with both directions of every edge stored and
        no self-loops.
    features : numpy.ndarray
        n x d feature matrix.
    labels : numpy.ndarray
        Integer labels in ``[0, n_classes)``.
    train_mask, val_mask, test_mask : numpy.ndarray, optional
        Pairwise disjoint boolean masks of length n, by default all False.
    n_classes : int, optional
        Number of classes, by default ``labels.max() + 1``.
    class_names : tuple of str, optional
        Original class names in label order.
    name : str, optional
        Dataset name.
    """

    adjacency: sp.csr_matrix
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray = None
    val_mask: np.ndarray = None
    test_mask: np.ndarray = None
    n_classes: int = None
    class_names: tuple = field(default=())
    name: str = ""

    def __post_init__(self):
        adjacency = sp.csr_matrix(self.adjacency)
        adjacency.sort_indices()
        features = np.asarray(self.features)
        labels = np.asarray(self.labels, dtype=np.int64)
        n = adjacency.shape[0]
        if adjacency.shape != (n, n):
            raise ShapeError("Graph adjacency", adjacency.shape, (n, n))
        if features.ndim != 2 or features.shape[0] != n:
            raise ShapeError("Graph features", features.shape, (n, "d"))
        if labels.shape != (n,):
            raise ShapeError("Graph labels", labels.shape, (n,))
        if (adjacency != adjacency.T).nnz != 0:
            raise ParameterError("adjacency must be symmetric")
        n_classes = self.n_classes
        if n_classes is None:
            n_classes = int(labels.max()) + 1 if n > 0 else 0
        if n > 0 and (labels.min() < 0 or labels.max() >= n_classes):
            raise ParameterError(f"labels must be in [0, {n_classes})")
        masks = []
        for name in ("train_mask", "val_mask", "test_mask"):
            mask = getattr(self, name)
            mask = _empty_mask(n) if mask is None else np.asarray(mask, dtype=bool)
            if mask.shape != (n,):
                raise ShapeError(f"Graph {name}", mask.shape, (n,))
            masks.append(mask)
        train, val, test = masks
        if (train & val).any() or (train & test).any() or (val & test).any():
            raise ParameterError("train, val and test masks must be disjoint")
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "train_mask", train)
        object.__setattr__(self, "val_mask", val)
        object.__setattr__(self, "test_mask", test)
        object.__setattr__(self, "n_classes", int(n_classes))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    def __repr__(self):
        return (
            f"Graph(name={self.name!r}, n={self.n}, edges={self.n_edges}, "
            f"d={self.n_features}, C={self.n_classes}, "
            f"split={self.train_mask.sum()}/{self.val_mask.sum()}/"
            f"{self.test_mask.sum()})"
        )

    @property
    def n(self):
        return self.adjacency.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_edges(self):
        """Number of undirected edges."""
        return self.adjacency.nnz // 2

    @property
    def degrees(self):
        return np.diff(self.adjacency.indptr)

    def with_masks(self, train, val, test):
        """Copy of the graph with new split masks."""
        return replace(self, train_mask=train, val_mask=val, test_mask=test)

    def with_features(self, features):
        """Copy of the graph with a new feature matrix."""
        return replace(self, features=features)


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """Symmetric normalized adjacency with self-loops.

    Entry (v, u) equals ``1 / sqrt((deg(v) + 1) * (deg(u) + 1))`` for every
    edge and self-loop.

    Attributes
    ----------
    matrix : scipy.sparse.csr_matrix
        n x n matrix with sorted column indices.
    """

    matrix: sp.csr_matrix

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def dtype(self):
        return self.matrix.dtype

    @property
    def indptr(self):
        return self.matrix.indptr

    @property
    def indices(self):
        return self.matrix.indices

    @cached_property
    def rows(self):
        """Row index of every stored entry, aligned with ``indices``."""
        return np.repeat(np.arange(self.n), np.diff(self.matrix.indptr))

    def astype(self, dtype):
        if self.matrix.dtype == dtype:
            return self
        return NormalizedAdjacency(self.matrix.astype(dtype))

    def toarray(self):
        return self.matrix.toarray()
