"""Deep GNN assembled from convolution layers and normalizers.

For GCN and GAT a depth-K model stacks K convolutions: the first K - 1 map
to the hidden width and are each followed by the normalizer, the last maps
to the classes. Dropout is applied to the input of every convolution.

For SGC a depth-K model applies K parameter-free propagations, each followed
by the normalizer, then dropout and a linear classifier.

The hidden representation returned next to the logits is the input of the
final layer (the classifier for SGC).
"""

from contextlib import nullcontext

import numpy as np

from dgnflow.autodiff.functions import dropout
from dgnflow.autodiff.tensor import Tensor, no_grad
from dgnflow.errors import ParameterError
from dgnflow.graph.adjacency import normalize_adjacency
from dgnflow.layers.convolution import GatLayer, GcnLayer, Linear, SgcProp
from dgnflow.layers.normalization import NORMALIZERS, DgnLayer, make_normalizer

__all__ = ["MODELS", "Model"]

MODELS = ("gcn", "gat", "sgc")


class Model:
    """Graph neural network with normalization between propagation layers.

    Parameters
    ----------
    kind : {'gcn', 'gat', 'sgc'}
    depth : int
        Number of propagation layers K.
    n_features : int
        Input width d.
    n_classes : int
        Number of classes C.
    hidden : int, optional
        Hidden width for GCN and GAT, by default 16
    norm : {'none', 'batch', 'pair', 'dgn'}, optional
        Normalizer placed after each propagation, by default 'none'
    groups : int, optional
        Number of DGN groups, by default 10
    lam : float, optional
        DGN balancing factor, by default 0.01
    dropout : float, optional
        Dropout probability, by default 0.0
    seed : int, optional
        Seeds the weight initialization and the dropout masks, by default 0
    dtype : numpy dtype, optional
        Dtype of parameters and activations, by default float32

    Examples
    --------
    >>> model = Model("sgc", depth=5, n_features=1433, n_classes=7, norm="dgn")
    >>> a, x = model.inputs(graph)
    >>> logits, hidden = model(a, x)
    """

    def __init__(
        self,
        kind,
        depth,
        n_features,
        n_classes,
        hidden=16,
        norm="none",
        groups=10,
        lam=0.01,
        dropout=0.0,
        seed=0,
        dtype=np.float32,
    ):
        if kind not in MODELS:
            raise ParameterError(f"unknown model '{kind}', expected one of {MODELS}")
        if norm not in NORMALIZERS:
            raise ParameterError(f"unknown normalizer '{norm}', expected one of {NORMALIZERS}")
        if depth < 1:
            raise ParameterError(f"depth must be at least 1, got {depth}")
        self.kind = kind
        self.depth = depth
        self.norm = norm
        self.dropout = dropout
        self.dtype = np.dtype(dtype)
        self.training = True
        rng = np.random.default_rng(seed)
        self.rng = np.random.default_rng([seed, 1])

        if kind == "sgc":
            self.layers = [SgcProp() for _ in range(depth)]
            self.normalizers = [
                make_normalizer(norm, n_features, rng, groups, lam, dtype)
                for _ in range(depth)
            ]
            self.classifier = Linear(n_features, n_classes, rng, dtype)
        else:
            layer_class = GcnLayer if kind == "gcn" else GatLayer
            dims = [n_features] + [hidden] * (depth - 1) + [n_classes]
            self.layers = [
                layer_class(dims[i], dims[i + 1], rng, dtype=dtype) for i in range(depth)
            ]
            self.normalizers = [
                make_normalizer(norm, hidden, rng, groups, lam, dtype)
                for _ in range(depth - 1)
            ]
            self.classifier = None
        self.trace = []
        self._cache = None

    def __repr__(self):
        return (
            f"Model(kind={self.kind!r}, depth={self.depth}, norm={self.norm!r}, "
            f"parameters={sum(p.data.size for p in self.parameters())})"
        )

    @property
    def components(self):
        parts = list(self.layers) + list(self.normalizers)
        if self.classifier is not None:
            parts.append(self.classifier)
        return parts

    def parameters(self):
        return [p for part in self.components for p in part.parameters()]

    def dgn_layers(self):
        return [n for n in self.normalizers if isinstance(n, DgnLayer)]

    def train(self, mode=True):
        self.training = mode
        return self

    def eval(self):
        return self.train(False)

    def state_dict(self):
        """Copies of all parameters and running statistics, keyed by position."""
        state = {}
        for i, part in enumerate(self.components):
            for name, value in part.state_dict().items():
                state[f"{i}.{name}"] = value
        return state

    def load_state_dict(self, state):
        for i, part in enumerate(self.components):
            prefix = f"{i}."
            part.load_state_dict(
                {k[len(prefix) :]: v for k, v in state.items() if k.startswith(prefix)}
            )

    def inputs(self, g):
        """Normalized adjacency and feature tensor of ``g`` in the model dtype."""
        a = normalize_adjacency(g, dtype=self.dtype)
        x = Tensor(np.asarray(g.features, dtype=self.dtype))
        return a, x

    def __call__(self, a, x, record=False):
        return self.forward(a, x, record)

    def forward(self, a, x, record=False):
        """Compute logits and the hidden representation.

        Parameters
        ----------
        a : NormalizedAdjacency
        x : Tensor
            n x d input features.
        record : bool, optional
            Keep the input of every normalizer in :attr:`trace`, by default
            False

        Returns
        -------
        logits : Tensor
            n x C.
        hidden : Tensor
            Input of the final layer.
        """
        self.trace = []
        if self.kind == "sgc":
            hidden = self._propagate(a, x, record)
            h = dropout(hidden, self.dropout, self.training, self.rng)
            return self.classifier(h), hidden

        h = x
        hidden = x
        for i, layer in enumerate(self.layers):
            last = i == self.depth - 1
            if last:
                hidden = h
            h = dropout(h, self.dropout, self.training, self.rng)
            h = layer(a, h, last_layer=last)
            if not last:
                if record:
                    self.trace.append(h)
                h = self.normalizers[i](h, training=self.training)
        return h, hidden

    def _propagate(self, a, x, record):
        # without trainable state between propagations the result only
        # depends on the graph
        stateless = self.norm in ("none", "pair")
        if stateless and not record and self._cache is not None:
            cached_a, cached_x, cached_h = self._cache
            if cached_a is a and cached_x is x:
                return cached_h
        h = x
        with no_grad() if stateless else nullcontext():
            for prop, normalizer in zip(self.layers, self.normalizers, strict=True):
                h = prop(a, h)
                if record:
                    self.trace.append(h)
                h = normalizer(h, training=self.training)
        if stateless:
            self._cache = (a, x, h)
        return h
