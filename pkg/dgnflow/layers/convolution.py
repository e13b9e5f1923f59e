"""Graph convolution layers.

GCN
    ``ReLU(A_hat @ H @ W)`` with the symmetric normalized adjacency.
GAT
    Single-head attention. Scores ``leaky_relu(a1 . Wh_v + a2 . Wh_u, 0.2)``
    are normalized with a softmax over the closed neighborhood of v, and
    the output is ``ReLU(sum_u alpha_vu W h_u)``.
SGC
    Parameter-free propagation ``A_hat @ H``. A depth-K model applies K
    propagations and a single linear classifier.

The nonlinearity is omitted on the last layer, whose output feeds the
cross-entropy loss as logits.
"""

import numpy as np

from dgnflow.autodiff.functions import activation, matmul
from dgnflow.autodiff.tensor import Tensor
from dgnflow.graph.adjacency import normalize_adjacency
from dgnflow.graph.graph import NormalizedAdjacency
from dgnflow.graph.propagation import (
    edge_aggregate,
    gather_rows,
    segment_softmax,
    spmm,
)
from dgnflow.layers.layer import Layer, glorot_init

__all__ = [
    "GatLayer",
    "GcnLayer",
    "Linear",
    "SgcProp",
    "gat_attention",
    "gat_forward",
    "gcn_forward",
    "sgc_forward",
]


class GcnLayer(Layer):
    """Graph convolution with a trainable ``d_in x d_out`` weight."""

    def __init__(self, d_in, d_out, rng, dtype=np.float64):
        self.weight = glorot_init(d_in, d_out, rng, dtype)

    def __repr__(self):
        return f"GcnLayer({self.weight.shape[0]}, {self.weight.shape[1]})"

    def __call__(self, a, h, last_layer=False):
        return gcn_forward(self, a, h, last_layer)


def gcn_forward(layer, a, h, last_layer=False):
    """Apply a GCN layer.

    Parameters
    ----------
    layer : GcnLayer
    a : NormalizedAdjacency
    h : Tensor
        n x d_in node representations.
    last_layer : bool, optional
        Skip the ReLU, by default False

    Returns
    -------
    Tensor
        n x d_out representations.
    """
    out = spmm(a, matmul(h, layer.weight))
    return out if last_layer else activation(out, "relu")


class GatLayer(Layer):
    """Single-head graph attention layer.

    Parameters
    ----------
    d_in, d_out : int
    rng : numpy.random.Generator
    slope : float, optional
        Negative slope of the score nonlinearity, by default 0.2
    dtype : numpy dtype, optional
    """

    def __init__(self, d_in, d_out, rng, slope=0.2, dtype=np.float64):
        self.weight = glorot_init(d_in, d_out, rng, dtype)
        self.attention = glorot_init(2 * d_out, 1, rng, dtype)
        self.slope = slope

    def __repr__(self):
        return f"GatLayer({self.weight.shape[0]}, {self.weight.shape[1]})"

    def __call__(self, a, h, last_layer=False):
        return gat_forward(self, a, h, last_layer)


def _pattern(g):
    if isinstance(g, NormalizedAdjacency):
        return g
    return normalize_adjacency(g)


def _attention(layer, a, wh):
    d = wh.shape[1]
    score_self = matmul(wh, layer.attention[:d])
    score_neighbor = matmul(wh, layer.attention[d:])
    scores = gather_rows(score_self, a.rows) + gather_rows(score_neighbor, a.indices)
    scores = activation(scores, "leaky_relu", slope=layer.slope)
    return segment_softmax(scores, a.indptr)


def gat_attention(layer, g, h):
    """Attention weights of every closed-neighborhood pair.

    Parameters
    ----------
    layer : GatLayer
    g : Graph or NormalizedAdjacency
        Supplies the neighborhoods (self-loops included).
    h : Tensor
        n x d_in node representations.

    Returns
    -------
    Tensor
        E x 1 weights in CSR order of the normalized adjacency; the weights
        of each node sum to one.
    """
    a = _pattern(g)
    return _attention(layer, a, matmul(h, layer.weight))


def gat_forward(layer, g, h, last_layer=False):
    """Apply a GAT layer.

    Parameters
    ----------
    layer : GatLayer
    g : Graph or NormalizedAdjacency
        Only the sparsity pattern is used.
    h : Tensor
        n x d_in node representations.
    last_layer : bool, optional
        Skip the ReLU, by default False

    Returns
    -------
    Tensor
    """
    a = _pattern(g)
    wh = matmul(h, layer.weight)
    out = edge_aggregate(_attention(layer, a, wh), wh, a)
    return out if last_layer else activation(out, "relu")


class SgcProp(Layer):
    """Parameter-free propagation step of SGC."""

    def __call__(self, a, h, last_layer=False):
        return sgc_forward(a, h)


def sgc_forward(a, h):
    """One SGC propagation, ``A_hat @ H``."""
    return spmm(a, h)


class Linear(Layer):
    """Dense ``h @ W + b`` layer, the SGC classifier."""

    def __init__(self, d_in, d_out, rng, dtype=np.float64):
        self.weight = glorot_init(d_in, d_out, rng, dtype)
        self.bias = Tensor(np.zeros((1, d_out), dtype=dtype), requires_grad=True)

    def __repr__(self):
        return f"Linear({self.weight.shape[0]}, {self.weight.shape[1]})"

    def __call__(self, h):
        return matmul(h, self.weight) + self.bias
