"""Normalizers placed between graph convolution layers.

none
    Identity.
batch
    Per-column standardization with trainable scale and shift. Batch
    statistics are used in training mode and exponentially averaged running
    statistics in evaluation mode.
pair
    Per-column standardization of the batch without affine parameters or
    running statistics.
dgn
    Differentiable group normalization. Nodes are softly assigned to G groups
    with ``S = softmax(H U)``. Group i normalizes ``S[:, i] * H`` per column
    with its own statistics, scale and shift, and the groups are summed and
    added back onto the input::

        out = H + lam * sum_i (gamma_i * (S[:, i] * H - mu_i) / sigma_i + beta_i)

Group statistics are computed over all n rows of the soft-masked matrix,
``mu = S.T @ H / n`` and ``var_i = mean((S[:, i] * H - mu_i)^2)``, so the
cost of a DGN layer grows linearly with G.

Example::

    import numpy as np
    from dgnflow.autodiff import Tensor
    from dgnflow.layers import DgnLayer

    rng = np.random.default_rng(0)
    dgn = DgnLayer(16, groups=10, lam=0.01, rng=rng)
    h = Tensor(rng.normal(size=(100, 16)))
    out = dgn(h, training=True)
"""

import numpy as np

from dgnflow.autodiff.functions import matmul, row_softmax
from dgnflow.autodiff.tensor import Function, Tensor, as_tensor
from dgnflow.errors import ParameterError, ShapeError
from dgnflow.layers.layer import Layer, glorot_init

__all__ = [
    "NORMALIZERS",
    "BatchNorm",
    "DgnLayer",
    "Identity",
    "PairNorm",
    "batch_norm",
    "dgn_assign",
    "dgn_forward",
    "make_normalizer",
    "pair_norm",
]

NORMALIZERS = ("none", "batch", "pair", "dgn")


def column_moments(x):
    """Population mean and variance of every column, each 1 x d."""
    mean = x.mean(axis=0, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=0, keepdims=True)
    return mean, var


def group_moments(s, h):
    """Mean and variance of the columns of every soft-masked group ``S[:, i] * H``.

    Returns G x d arrays. The variance is accumulated around the group
    mean, one group at a time, so it stays accurate when the columns share
    a large offset.
    """
    n = h.shape[0]
    mean = s.T @ h / n
    var = np.empty_like(mean)
    for i in range(s.shape[1]):
        centred = s[:, i : i + 1] * h - mean[i]
        var[i] = (centred * centred).sum(axis=0) / n
    return mean, var


class Standardize(Function):
    """Per-column ``gamma * (x - mean) / sqrt(var + eps) + beta``.

    ``moments`` are the batch moments of ``x`` unless ``frozen``, in which
    case they are constants such as running statistics. Without ``gamma``
    and ``beta`` the output is not rescaled.
    """

    def __init__(self, moments, eps, frozen=False):
        super().__init__()
        self.moments = moments
        self.eps = eps
        self.frozen = frozen

    def forward(self, x, gamma=None, beta=None):
        mean, var = self.moments
        self.x = x
        self.mean = mean.astype(x.dtype, copy=False)
        self.std = np.sqrt(var + self.eps).astype(x.dtype, copy=False)
        self.gamma = gamma
        out = (x - self.mean) / self.std
        if gamma is not None:
            out = gamma * out + beta
        return out

    def backward(self, grad):
        xhat = (self.x - self.mean) / self.std
        gx = grad if self.gamma is None else grad * self.gamma
        if self.frozen:
            dx = gx / self.std
        else:
            dx = (
                gx
                - gx.mean(axis=0, keepdims=True)
                - xhat * (gx * xhat).mean(axis=0, keepdims=True)
            ) / self.std
        if self.gamma is None:
            return (dx,)
        dgamma = (grad * xhat).sum(axis=0, keepdims=True)
        dbeta = grad.sum(axis=0, keepdims=True)
        return dx, dgamma, dbeta


class GroupNormalize(Function):
    """Fused DGN combination ``H + lam * (H * (S @ A) + c)``.

    ``A = gamma / sigma`` and ``c = sum_i (beta_i - gamma_i * mu_i / sigma_i)``
    with G x d group moments ``mu`` and ``sigma = sqrt(var + eps)``. The
    moments are those of :func:`group_moments` for ``S`` and ``H`` unless
    ``frozen``.
    """

    def __init__(self, moments, lam, eps, frozen=False):
        super().__init__()
        self.moments = moments
        self.lam = lam
        self.eps = eps
        self.frozen = frozen

    def forward(self, h, s, gamma, beta):
        mean, var = (m.astype(h.dtype, copy=False) for m in self.moments)
        std = np.sqrt(var + self.eps)
        scale = gamma / std
        shift = (beta - gamma * mean / std).sum(axis=0, keepdims=True)
        mixed = s @ scale
        self.h, self.s, self.gamma = h, s, gamma
        self.mean, self.std, self.scale, self.mixed = mean, std, scale, mixed
        return h + self.lam * (h * mixed + shift)

    def backward(self, grad):
        lam, h, s = self.lam, self.h, self.s
        gamma, mean, std, scale = self.gamma, self.mean, self.std, self.scale
        n = h.shape[0]
        dmixed = lam * grad * h
        dh = grad + lam * grad * self.mixed
        dscale = s.T @ dmixed
        ds = dmixed @ scale.T
        dshift = lam * grad.sum(axis=0, keepdims=True)
        dbeta = np.broadcast_to(dshift, gamma.shape).copy()
        dgamma = dscale / std - dshift * mean / std
        if not self.frozen:
            dstd = -dscale * gamma / std**2 + dshift * gamma * mean / std**2
            dsquare = dstd / (2 * std)
            dmean = -dshift * gamma / std - 2 * dsquare * mean
            dh += s @ dmean / n + 2 * h * ((s * s) @ dsquare) / n
            ds += h @ dmean.T / n + 2 * s * ((h * h) @ dsquare.T) / n
        return dh, ds, dgamma, dbeta


class Identity(Layer):
    kind = "none"

    def __call__(self, h, training=False):
        return h


class BatchNorm(Layer):
    """Batch normalization state.

    Parameters
    ----------
    d : int
        Number of columns.
    momentum : float, optional
        Weight of the newest batch in the running averages, by default 0.1
    eps : float, optional
        Added to the variance, by default 1e-5
    dtype : numpy dtype, optional

    Attributes
    ----------
    gamma, beta : Tensor
        1 x d trainable scale (initially 1) and shift (initially 0).
    running_mean, running_var : numpy.ndarray
        1 x d running statistics.
    """

    kind = "batch"
    _buffers = ("running_mean", "running_var")

    def __init__(self, d, momentum=0.1, eps=1e-5, dtype=np.float64):
        self.gamma = Tensor(np.ones((1, d), dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros((1, d), dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros((1, d))
        self.running_var = np.ones((1, d))
        self.momentum = momentum
        self.eps = eps

    def __repr__(self):
        return f"BatchNorm({self.gamma.shape[1]})"

    @property
    def running_std(self):
        return np.sqrt(self.running_var + self.eps)

    def __call__(self, h, training=False):
        return batch_norm(self, h, training)


def batch_norm(state, h, training=False):
    """Batch-normalize the columns of ``h``.

    In training mode the population mean and variance of each column are
    used and the running statistics of ``state`` are updated; otherwise the
    running statistics are used.

    Parameters
    ----------
    state : BatchNorm
    h : Tensor
        n x d input.
    training : bool, optional

    Returns
    -------
    Tensor
    """
    if h.shape[1] != state.gamma.shape[1]:
        raise ShapeError("batch_norm", h.shape, state.gamma.shape)
    if not training:
        moments = (state.running_mean, state.running_var)
        return Standardize.apply(
            h, state.gamma, state.beta, moments=moments, eps=state.eps, frozen=True
        )
    mean, var = column_moments(h.data)
    m = state.momentum
    state.running_mean = (1 - m) * state.running_mean + m * mean
    state.running_var = (1 - m) * state.running_var + m * var
    return Standardize.apply(h, state.gamma, state.beta, moments=(mean, var), eps=state.eps)


class PairNorm(Layer):
    """Column standardization without affine parameters or running statistics."""

    kind = "pair"

    def __init__(self, eps=1e-9):
        self.eps = eps

    def __call__(self, h, training=False):
        return pair_norm(h, eps=self.eps)


def pair_norm(h, eps=1e-9):
    """Standardize every column of ``h`` with its batch statistics.

    ``eps`` guards constant columns, which map to zero.
    """
    h = as_tensor(h)
    return Standardize.apply(h, moments=column_moments(h.data), eps=eps)


class DgnLayer(Layer):
    """Differentiable group normalization state.

    Parameters
    ----------
    d : int
        Number of columns of the normalized representation.
    groups : int
        Number of groups G.
    lam : float
        Weight of the group-normalized term.
    rng : numpy.random.Generator
        Used for the Glorot initialization of ``U``.
    momentum : float, optional
        By default 0.1
    eps : float, optional
        By default 1e-5
    dtype : numpy dtype, optional

    Attributes
    ----------
    assign : Tensor
        d x G assignment weights U.
    gamma, beta : Tensor
        G x d trainable scale (initially 1) and shift (initially 0); row i
        belongs to group i.
    running_mean, running_var : numpy.ndarray
        G x d running group statistics.
    """

    kind = "dgn"
    _buffers = ("running_mean", "running_var")

    def __init__(self, d, groups, lam, rng, momentum=0.1, eps=1e-5, dtype=np.float64):
        if groups < 1:
            raise ParameterError(f"number of groups must be at least 1, got {groups}")
        if lam < 0:
            raise ParameterError(f"lam must be non-negative, got {lam}")
        self.assign = glorot_init(d, groups, rng, dtype)
        self.gamma = Tensor(np.ones((groups, d), dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros((groups, d), dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros((groups, d))
        self.running_var = np.ones((groups, d))
        self.groups = groups
        self.lam = lam
        self.momentum = momentum
        self.eps = eps

    def __repr__(self):
        return f"DgnLayer({self.gamma.shape[1]}, groups={self.groups}, lam={self.lam})"

    @property
    def running_std(self):
        return np.sqrt(self.running_var + self.eps)

    def __call__(self, h, training=False):
        return dgn_forward(self, h, training)


def dgn_assign(state, h):
    """Soft group assignment ``softmax(H U)``, row-stochastic, n x G."""
    return row_softmax(matmul(h, state.assign))


def dgn_forward(state, h, training=False):
    """Apply differentiable group normalization.

    Parameters
    ----------
    state : DgnLayer
    h : Tensor
        n x d input.
    training : bool, optional
        Use batch group statistics and update the running statistics,
        otherwise use the running statistics.

    Returns
    -------
    Tensor
        ``H + lam * sum_i normalized group i``.
    """
    if state.groups < 1:
        raise ParameterError("number of groups must be at least 1")
    if h.shape[1] != state.gamma.shape[1]:
        raise ShapeError("dgn_forward", h.shape, state.gamma.shape)
    s = dgn_assign(state, h)
    if not training:
        moments = (state.running_mean, state.running_var)
        return GroupNormalize.apply(
            h,
            s,
            state.gamma,
            state.beta,
            moments=moments,
            lam=state.lam,
            eps=state.eps,
            frozen=True,
        )
    mean, var = group_moments(s.data, h.data)
    m = state.momentum
    state.running_mean = (1 - m) * state.running_mean + m * mean
    state.running_var = (1 - m) * state.running_var + m * var
    return GroupNormalize.apply(
        h, s, state.gamma, state.beta, moments=(mean, var), lam=state.lam, eps=state.eps
    )


def make_normalizer(kind, d, rng, groups=10, lam=0.01, dtype=np.float64):
    """Normalizer of the given kind for d-column representations."""
    if kind == "none":
        return Identity()
    if kind == "batch":
        return BatchNorm(d, dtype=dtype)
    if kind == "pair":
        return PairNorm()
    if kind == "dgn":
        return DgnLayer(d, groups, lam, rng, dtype=dtype)
    raise ParameterError(f"unknown normalizer '{kind}', expected one of {NORMALIZERS}")
