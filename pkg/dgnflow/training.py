"""Full-batch transductive training.

Every epoch runs the whole graph through the model, computes the
cross-entropy on the training nodes, and takes one Adam step with L2
regularization added to the gradient. Training stops early when the
validation accuracy has not improved for ``patience`` epochs, and the
parameters and running statistics of the best epoch are restored.

Example::

    import dgnflow as dg

    g = dg.graph.load_content_cites("cora.content", "cora.cites")
    g = g.with_masks(*dg.graph.generate_split(g, seed=0))
    result = dg.train(dg.ModelConfig("gcn", depth=2), dg.TrainConfig(), g)
    dg.evaluate(result.model, g, g.test_mask).accuracy
"""

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from dgnflow.autodiff.tensor import Function, backward, no_grad
from dgnflow.errors import ConfigError, DivergenceError, ParameterError, ShapeError
from dgnflow.layers.layer import glorot_init
from dgnflow.layers.model import MODELS, Model
from dgnflow.layers.normalization import NORMALIZERS

logger = logging.getLogger(__name__)

__all__ = [
    "DATASET_PRESETS",
    "Adam",
    "AdamState",
    "DatasetPreset",
    "Evaluation",
    "History",
    "ModelConfig",
    "TrainConfig",
    "TrainResult",
    "adam_step",
    "build_model",
    "evaluate",
    "glorot_init",
    "masked_cross_entropy",
    "train",
]


@dataclass(frozen=True)
class DatasetPreset:
    """Split sizes and hyperparameters used for a benchmark dataset."""

    per_class: int
    n_val: int
    n_test: int
    groups: int
    learning_rate: float
    weight_decay: float
    dropout: float


DATASET_PRESETS = {
    "cora": DatasetPreset(20, 500, 1000, 10, 5e-3, 5e-4, 0.6),
    "citeseer": DatasetPreset(20, 500, 1000, 10, 5e-3, 5e-4, 0.6),
    "pubmed": DatasetPreset(20, 500, 1000, 5, 1e-2, 1e-3, 0.6),
    "coauthorcs": DatasetPreset(40, 2250, 15483, 10, 5e-3, 5e-4, 0.6),
}


@dataclass
class ModelConfig:
    """Architecture of a model.

    Attributes
    ----------
    kind : {'gcn', 'gat', 'sgc'}
    depth : int
        Number of propagation layers K.
    hidden : int
        Hidden width of GCN and GAT.
    norm : {'none', 'batch', 'pair', 'dgn'}
    groups : int
        Number of DGN groups G.
    lam : float
        DGN balancing factor.
    """

    kind: str = "gcn"
    depth: int = 2
    hidden: int = 16
    norm: str = "none"
    groups: int = 10
    lam: float = 0.01

    def __post_init__(self):
        if self.kind not in MODELS:
            raise ConfigError(f"model kind must be one of {MODELS}, got '{self.kind}'")
        if self.norm not in NORMALIZERS:
            raise ConfigError(f"norm must be one of {NORMALIZERS}, got '{self.norm}'")
        if self.depth < 1:
            raise ConfigError(f"depth must be at least 1, got {self.depth}")
        if self.hidden < 1:
            raise ConfigError(f"hidden must be at least 1, got {self.hidden}")
        if self.norm == "dgn" and self.groups < 1:
            raise ConfigError(f"groups must be at least 1, got {self.groups}")
        if self.lam < 0:
            raise ConfigError(f"lam must be non-negative, got {self.lam}")


@dataclass
class TrainConfig:
    """Optimizer and training-loop settings.

    Attributes
    ----------
    learning_rate : float
    weight_decay : float
        L2 coefficient added to the gradient of every trainable tensor.
    dropout : float
        Dropout probability in [0, 1).
    max_epochs : int
    patience : int
        Epochs without validation improvement before stopping.
    seed : int
        Seeds weight initialization and dropout.
    dtype : {'float32', 'float64'}
    """

    learning_rate: float = 5e-3
    weight_decay: float = 5e-4
    dropout: float = 0.6
    max_epochs: int = 1000
    patience: int = 100
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if not 0 <= self.dropout < 1:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.max_epochs < 0:
            raise ConfigError(f"max_epochs must be non-negative, got {self.max_epochs}")
        if not 0 <= self.patience <= self.max_epochs:
            raise ConfigError(
                f"patience must be in [0, max_epochs={self.max_epochs}], "
                f"got {self.patience}"
            )
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be 'float32' or 'float64', got '{self.dtype}'")


class CrossEntropy(Function):
    """Mean softmax cross-entropy over the selected rows."""

    def __init__(self, labels, index):
        super().__init__()
        self.labels = labels
        self.index = index

    def forward(self, logits):
        z = logits[self.index]
        z = z - z.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
        log_prob = z - log_norm
        self.prob = np.exp(log_prob)
        self.shape = logits.shape
        picked = log_prob[np.arange(self.index.size), self.labels]
        return np.array([[-picked.mean()]], dtype=logits.dtype)

    def backward(self, grad):
        m = self.index.size
        local = self.prob.copy()
        local[np.arange(m), self.labels] -= 1
        out = np.zeros(self.shape, dtype=grad.dtype)
        out[self.index] = local * (grad[0, 0] / m)
        return (out,)


def masked_cross_entropy(logits, labels, mask):
    """Mean cross-entropy of the rows selected by ``mask``.

    Parameters
    ----------
    logits : Tensor
        n x C unnormalized scores.
    labels : numpy.ndarray
        Integer label of every node.
    mask : numpy.ndarray
        Boolean mask of length n.

    Returns
    -------
    Tensor
        1x1 loss, computed with log-sum-exp.

    Raises
    ------
    ParameterError
        If ``mask`` selects no node.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (logits.shape[0],):
        raise ShapeError("masked_cross_entropy", logits.shape, mask.shape)
    index = np.flatnonzero(mask)
    if index.size == 0:
        raise ParameterError("cross-entropy mask selects no node")
    labels = np.asarray(labels)[index]
    return CrossEntropy.apply(logits, labels=labels, index=index)


@dataclass
class AdamState:
    """First and second moment estimates, one array per parameter."""

    m: list
    v: list

    @classmethod
    def zeros(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(
    params,
    grads,
    state,
    lr,
    weight_decay=0.0,
    t=1,
    beta1=0.9,
    beta2=0.999,
    eps=1e-8,
):
    """One Adam update with bias correction.

    The L2 term ``weight_decay * p`` is added to the gradient before the
    moment updates.

    Parameters
    ----------
    params, grads : list of numpy.ndarray
    state : AdamState
    lr : float
    weight_decay : float, optional
    t : int, optional
        1-based step number.
    beta1, beta2, eps : float, optional

    Returns
    -------
    params : list of numpy.ndarray
        Updated values (new arrays).
    state : AdamState
        Updated moments.
    """
    if t < 1:
        raise ParameterError(f"step number must be at least 1, got {t}")
    if not len(params) == len(grads) == len(state.m):
        raise ShapeError("adam_step", (len(params),), (len(grads),))
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v, strict=True):
        if g.shape != p.shape:
            raise ShapeError("adam_step", p.shape, g.shape)
        g = g + weight_decay * p
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        new_params.append((p - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v)


class Adam:
    """Adam optimizer over trainable tensors.

    Parameters
    ----------
    params : list of Tensor
    lr : float
    weight_decay : float, optional
        By default 0.0
    """

    def __init__(self, params, lr, weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.state = AdamState.zeros([p.data for p in self.params])
        self.t = 0

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        self.t += 1
        values = [p.data for p in self.params]
        grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in self.params]
        values, self.state = adam_step(
            values, grads, self.state, self.lr, self.weight_decay, self.t
        )
        for p, value in zip(self.params, values, strict=True):
            p.data = value


@dataclass
class History:
    """Per-epoch training record."""

    epoch: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    best_epoch: int = 0

    def __len__(self):
        return len(self.epoch)

    def append(self, epoch, train_loss, train_accuracy, val_accuracy):
        self.epoch.append(epoch)
        self.train_loss.append(train_loss)
        self.train_accuracy.append(train_accuracy)
        self.val_accuracy.append(val_accuracy)

    @property
    def best_val_accuracy(self):
        return max(self.val_accuracy) if self.val_accuracy else float("nan")

    def to_frame(self):
        return pd.DataFrame(
            {
                "train_loss": self.train_loss,
                "train_accuracy": self.train_accuracy,
                "val_accuracy": self.val_accuracy,
            },
            index=pd.Index(self.epoch, name="epoch"),
        )


@dataclass
class TrainResult:
    model: Model
    history: History
    inputs: tuple = None


@dataclass
class Evaluation:
    """Accuracy on a mask with the surfaces the metrics need."""

    accuracy: float
    logits: np.ndarray
    hidden: np.ndarray


def build_model(model_cfg, train_cfg, n_features, n_classes):
    """Initialize a :class:`~dgnflow.layers.Model` from configurations."""
    return Model(
        model_cfg.kind,
        model_cfg.depth,
        n_features,
        n_classes,
        hidden=model_cfg.hidden,
        norm=model_cfg.norm,
        groups=model_cfg.groups,
        lam=model_cfg.lam,
        dropout=train_cfg.dropout,
        seed=train_cfg.seed,
        dtype=np.dtype(train_cfg.dtype),
    )


def _accuracy(logits, labels, mask):
    index = np.flatnonzero(mask)
    return float(np.mean(np.argmax(logits[index], axis=1) == labels[index]))


def evaluate(model, g, mask, inputs=None):
    """Evaluate ``model`` on the nodes selected by ``mask``.

    The model is put in evaluation mode: dropout is off and normalizers use
    their running statistics.

    Parameters
    ----------
    model : Model
    g : Graph
    mask : numpy.ndarray
        Boolean node mask.
    inputs : tuple, optional
        ``model.inputs(g)``, to avoid recomputing them.

    Returns
    -------
    Evaluation

    Raises
    ------
    ParameterError
        If ``mask`` selects no node.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ParameterError("evaluation mask selects no node")
    a, x = inputs if inputs is not None else model.inputs(g)
    model.eval()
    with no_grad():
        logits, hidden = model(a, x)
    return Evaluation(_accuracy(logits.data, g.labels, mask), logits.data, hidden.data)


def train(model_cfg, train_cfg, g):
    """Train a model on ``g`` with early stopping on validation accuracy.

    Parameters
    ----------
    model_cfg : ModelConfig
    train_cfg : TrainConfig
    g : Graph
        Graph with a non-empty training mask.

    Returns
    -------
    TrainResult
        Model restored to its best validation epoch, and the history.

    Raises
    ------
    DivergenceError
        If the training loss becomes non-finite.
    """
    model = build_model(model_cfg, train_cfg, g.n_features, g.n_classes)
    inputs = model.inputs(g)
    a, x = inputs
    labels = g.labels
    missing = sorted(set(range(g.n_classes)) - set(labels[g.train_mask].tolist()))
    if missing:
        warnings.warn(
            f"classes {missing} have no training nodes", category=UserWarning, stacklevel=2
        )
    has_val = bool(g.val_mask.any())
    optimizer = Adam(model.parameters(), train_cfg.learning_rate, train_cfg.weight_decay)
    history = History()
    best_val = -np.inf
    best_state = model.state_dict()
    wait = 0

    for epoch in range(1, train_cfg.max_epochs + 1):
        model.train()
        optimizer.zero_grad()
        logits, _ = model(a, x)
        loss = masked_cross_entropy(logits, labels, g.train_mask)
        value = loss.item()
        if not np.isfinite(value):
            raise DivergenceError(epoch, value)
        backward(loss)
        optimizer.step()
        train_acc = _accuracy(logits.data, labels, g.train_mask)
        val_acc = evaluate(model, g, g.val_mask, inputs).accuracy if has_val else np.nan
        history.append(epoch, value, train_acc, val_acc)
        logger.debug(
            "epoch %d: loss %.4f, train acc %.4f, val acc %.4f",
            epoch,
            value,
            train_acc,
            val_acc,
        )
        if not has_val:
            best_state = model.state_dict()
            history.best_epoch = epoch
            continue
        if val_acc > best_val:
            best_val = val_acc
            best_state = model.state_dict()
            history.best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= train_cfg.patience:
                break

    model.load_state_dict(best_state)
    model.eval()
    logger.info(
        "%s depth %d norm %s: best val acc %.4f at epoch %d of %d",
        model_cfg.kind,
        model_cfg.depth,
        model_cfg.norm,
        history.best_val_accuracy,
        history.best_epoch,
        len(history),
    )
    return TrainResult(model, history, inputs)
