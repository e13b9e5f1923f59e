"""Sparse propagation primitives recorded on the autodiff tape.

Edge-level tensors are E x 1 columns aligned with the stored entries of a
:class:`~dgnflow.graph.graph.NormalizedAdjacency`, in CSR order.
"""

import numpy as np
import scipy.sparse as sp

from dgnflow.autodiff.tensor import Function
from dgnflow.errors import ShapeError
from dgnflow.graph.graph import NormalizedAdjacency

__all__ = ["edge_aggregate", "gather_rows", "segment_softmax", "spmm"]


def _matrix(a):
    return a.matrix if isinstance(a, NormalizedAdjacency) else sp.csr_matrix(a)


class SparseMatMul(Function):
    def __init__(self, matrix):
        super().__init__()
        self.matrix = matrix

    def forward(self, h):
        if self.matrix.shape[1] != h.shape[0]:
            raise ShapeError("spmm", self.matrix.shape, h.shape)
        if self.matrix.dtype != h.dtype:
            self.matrix = self.matrix.astype(h.dtype)
        return np.asarray(self.matrix @ h)

    def backward(self, grad):
        return (np.asarray(self.matrix.T @ grad),)


def spmm(a, h):
    """Sparse-dense product ``a @ h``.

    Parameters
    ----------
    a : NormalizedAdjacency or scipy.sparse matrix
    h : Tensor
        n x d dense operand.

    Returns
    -------
    Tensor
        n x d product; the gradient with respect to ``h`` is ``a.T @ grad``.

    Raises
    ------
    ShapeError
        If the column count of ``a`` differs from the row count of ``h``.
    """
    return SparseMatMul.apply(h, matrix=_matrix(a))


class GatherRows(Function):
    def __init__(self, index):
        super().__init__()
        self.index = index

    def forward(self, a):
        self.shape = a.shape
        return a[self.index]

    def backward(self, grad):
        out = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(out, self.index, grad)
        return (out,)


def gather_rows(a, index):
    """Rows of ``a`` selected by an integer index array (repeats allowed)."""
    return GatherRows.apply(a, index=np.asarray(index, dtype=np.int64))


class SegmentSoftmax(Function):
    def __init__(self, indptr):
        super().__init__()
        self.indptr = indptr
        self.starts = indptr[:-1]
        self.rows = np.repeat(np.arange(indptr.size - 1), np.diff(indptr))

    def forward(self, scores):
        if scores.shape != (self.rows.size, 1):
            raise ShapeError("segment_softmax", scores.shape, (self.rows.size, 1))
        s = scores[:, 0]
        peak = np.maximum.reduceat(s, self.starts)
        e = np.exp(s - peak[self.rows])
        total = np.add.reduceat(e, self.starts)
        self.out = e / total[self.rows]
        return self.out[:, None]

    def backward(self, grad):
        g = grad[:, 0]
        dot = np.add.reduceat(g * self.out, self.starts)
        return ((self.out * (g - dot[self.rows]))[:, None],)


def segment_softmax(scores, indptr):
    """Softmax of edge scores within each CSR row.

    Every row must hold at least one entry, which holds for closed
    neighborhoods.

    Parameters
    ----------
    scores : Tensor
        E x 1 edge scores in CSR order.
    indptr : numpy.ndarray
        CSR row pointer of length n + 1.

    Returns
    -------
    Tensor
        E x 1 weights summing to one within each row.
    """
    return SegmentSoftmax.apply(scores, indptr=np.asarray(indptr))


class EdgeAggregate(Function):
    def __init__(self, indices, indptr, rows):
        super().__init__()
        self.indices = indices
        self.indptr = indptr
        self.rows = rows

    def forward(self, weights, h):
        if weights.shape != (self.indices.size, 1):
            raise ShapeError("edge_aggregate", weights.shape, (self.indices.size, 1))
        n = self.indptr.size - 1
        self.weights, self.h = weights, h
        self.matrix = sp.csr_matrix(
            (weights[:, 0], self.indices, self.indptr), shape=(n, h.shape[0])
        )
        return np.asarray(self.matrix @ h)

    def backward(self, grad):
        dw = dh = None
        if self.needs_input_grad[0]:
            dw = np.einsum("ij,ij->i", grad[self.rows], self.h[self.indices])[:, None]
        if self.needs_input_grad[1]:
            dh = np.asarray(self.matrix.T @ grad)
        return dw, dh


def edge_aggregate(weights, h, a):
    """Weighted neighbor sum ``out[v] = sum_u w[v, u] * h[u]``.

    Parameters
    ----------
    weights : Tensor
        E x 1 edge weights aligned with the stored entries of ``a``.
    h : Tensor
        n x d node values.
    a : NormalizedAdjacency
        Supplies the sparsity pattern; its values are ignored.

    Returns
    -------
    Tensor
        n x d aggregated values.
    """
    return EdgeAggregate.apply(weights, h, indices=a.indices, indptr=a.indptr, rows=a.rows)
