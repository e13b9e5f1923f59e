"""Differentiable primitives on 2-D tensors.

Binary elementwise functions broadcast a 1xd row, an nx1 column or a 1x1
scalar against an nxd operand; gradients are summed back to the operand
shape.
"""

import numpy as np

from dgnflow.autodiff.tensor import Function, Tensor
from dgnflow.errors import ParameterError, ShapeError

__all__ = [
    "Add",
    "Div",
    "Dropout",
    "Exp",
    "LeakyRelu",
    "Log",
    "MatMul",
    "Mul",
    "Neg",
    "Relu",
    "RowSoftmax",
    "Slice",
    "Sqrt",
    "Sub",
    "Sum",
    "Transpose",
    "activation",
    "dropout",
    "matmul",
    "row_softmax",
]


def _broadcast_shape(op, a, b):
    rows = _match(op, a.shape, b.shape, 0)
    cols = _match(op, a.shape, b.shape, 1)
    return rows, cols


def _match(op, sa, sb, axis):
    if sa[axis] == sb[axis] or sb[axis] == 1:
        return sa[axis]
    if sa[axis] == 1:
        return sb[axis]
    raise ShapeError(op, sa, sb)


def unbroadcast(grad, shape):
    """Sum ``grad`` over the axes along which an operand was broadcast."""
    if shape[0] == 1 and grad.shape[0] != 1:
        grad = grad.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        grad = grad.sum(axis=1, keepdims=True)
    return grad


class _Binary(Function):
    def forward(self, a, b):
        _broadcast_shape(type(self).__name__, a, b)
        self.shapes = (a.shape, b.shape)
        return self._forward(a, b)


class Add(_Binary):
    def _forward(self, a, b):
        return a + b

    def backward(self, grad):
        sa, sb = self.shapes
        return unbroadcast(grad, sa), unbroadcast(grad, sb)


class Sub(_Binary):
    def _forward(self, a, b):
        return a - b

    def backward(self, grad):
        sa, sb = self.shapes
        return unbroadcast(grad, sa), unbroadcast(-grad, sb)


class Mul(_Binary):
    def _forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        sa, sb = self.shapes
        da = unbroadcast(grad * self.b, sa) if self.needs_input_grad[0] else None
        db = unbroadcast(grad * self.a, sb) if self.needs_input_grad[1] else None
        return da, db


class Div(_Binary):
    def _forward(self, a, b):
        self.a, self.b = a, b
        return a / b

    def backward(self, grad):
        sa, sb = self.shapes
        da = db = None
        if self.needs_input_grad[0]:
            da = unbroadcast(grad / self.b, sa)
        if self.needs_input_grad[1]:
            db = unbroadcast(-grad * self.a / (self.b * self.b), sb)
        return da, db


class Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, grad):
        return (-grad,)


class MatMul(Function):
    def forward(self, a, b):
        if a.shape[1] != b.shape[0]:
            raise ShapeError("matmul", a.shape, b.shape)
        self.a, self.b = a, b
        return a @ b

    def backward(self, grad):
        da = grad @ self.b.T if self.needs_input_grad[0] else None
        db = self.a.T @ grad if self.needs_input_grad[1] else None
        return da, db


class Transpose(Function):
    def forward(self, a):
        return np.ascontiguousarray(a.T)

    def backward(self, grad):
        return (np.ascontiguousarray(grad.T),)


class Sum(Function):
    """Sum of all entries (``axis=None``), per column (0) or per row (1)."""

    def __init__(self, axis=None):
        super().__init__()
        if axis not in (None, 0, 1):
            raise ParameterError(f"axis must be None, 0 or 1, got {axis}")
        self.axis = axis

    def forward(self, a):
        self.shape = a.shape
        if self.axis is None:
            return np.array([[a.sum()]], dtype=a.dtype)
        return a.sum(axis=self.axis, keepdims=True)

    def backward(self, grad):
        return (np.broadcast_to(grad, self.shape).copy(),)


class Slice(Function):
    """Basic 2-D slicing, ``tensor[rows, cols]``, keeping two dimensions."""

    def __init__(self, key):
        super().__init__()
        if not isinstance(key, tuple):
            key = (key, slice(None))
        self.key = tuple(k if isinstance(k, slice) else _index_slice(k) for k in key)

    def forward(self, a):
        self.shape = a.shape
        self.dtype = a.dtype
        return a[self.key].copy()

    def backward(self, grad):
        out = np.zeros(self.shape, dtype=self.dtype)
        out[self.key] = grad
        return (out,)


class Sqrt(Function):
    def forward(self, a):
        self.out = np.sqrt(a)
        return self.out

    def backward(self, grad):
        return (grad / (2.0 * self.out),)


class Exp(Function):
    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, a):
        self.a = a
        return np.log(a)

    def backward(self, grad):
        return (grad / self.a,)


class RowSoftmax(Function):
    def forward(self, a):
        shifted = a - a.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        self.out = e / e.sum(axis=1, keepdims=True)
        return self.out

    def backward(self, grad):
        s = self.out
        return (s * (grad - (grad * s).sum(axis=1, keepdims=True)),)


class Relu(Function):
    # gradient at exactly zero is taken as 1
    def forward(self, a):
        self.mask = a >= 0
        return np.where(self.mask, a, 0).astype(a.dtype, copy=False)

    def backward(self, grad):
        return (grad * self.mask,)


class LeakyRelu(Function):
    def __init__(self, slope=0.2):
        super().__init__()
        self.slope = slope

    def forward(self, a):
        self.mask = a >= 0
        return np.where(self.mask, a, self.slope * a).astype(a.dtype, copy=False)

    def backward(self, grad):
        return (np.where(self.mask, grad, self.slope * grad),)


class Dropout(Function):
    """Inverted dropout with a precomputed keep mask."""

    def __init__(self, mask):
        super().__init__()
        self.mask = mask

    def forward(self, a):
        return a * self.mask.astype(a.dtype, copy=False)

    def backward(self, grad):
        return (grad * self.mask,)


def matmul(a, b):
    """Matrix product ``a @ b``.

    Raises
    ------
    ShapeError
        If the inner dimensions differ.
    """
    return MatMul.apply(a, b)


def row_softmax(a):
    """Softmax over each row, stabilized by subtracting the row maximum."""
    return RowSoftmax.apply(a)


def activation(a, kind="relu", slope=0.2):
    """Elementwise nonlinearity.

    Parameters
    ----------
    a : Tensor
    kind : {'relu', 'leaky_relu'}
    slope : float, optional
        Slope on the negative side for ``leaky_relu``, by default 0.2

    Returns
    -------
    Tensor
    """
    if kind == "relu":
        return Relu.apply(a)
    if kind == "leaky_relu":
        return LeakyRelu.apply(a, slope=slope)
    raise ParameterError(f"unknown activation '{kind}'")


def dropout(a, p, training, rng):
    """Inverted dropout.

    In training mode every element is zeroed with probability ``p`` and the
    survivors are scaled by ``1 / (1 - p)``. Outside training mode, or when
    ``p`` is zero, ``a`` is returned unchanged.

    Parameters
    ----------
    a : Tensor
    p : float
        Drop probability in [0, 1).
    training : bool
    rng : numpy.random.Generator
        Source of the keep mask.

    Raises
    ------
    ParameterError
        If ``p`` is outside [0, 1).
    """
    if not 0 <= p < 1:
        raise ParameterError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0:
        return a
    a = a if isinstance(a, Tensor) else Tensor(a)
    keep = rng.random(a.shape) >= p
    mask = keep / (1.0 - p)
    return Dropout.apply(a, mask=mask.astype(a.dtype))


def _index_slice(k):
    return slice(k, k + 1 if k != -1 else None)
