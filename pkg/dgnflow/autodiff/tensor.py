"""Two-dimensional tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a 2-D numpy array. Applying a :class:`Function` to
tensors records the function as the creator of its output, so every result
knows the operations that produced it. :func:`backward` collects these
operations into a :class:`Tape` in topological order and visits each of
them exactly once in reverse order, summing gradients of tensors that are
used more than once.

Example::

    import numpy as np
    from dgnflow.autodiff import Tensor, backward

    x = Tensor(np.array([[3.0]]), requires_grad=True)
    y = x * x
    backward(y)
    x.grad  # array([[6.]])
"""

from contextlib import contextmanager
from contextvars import ContextVar

import numpy as np

from dgnflow.errors import NonFiniteError, ShapeError

__all__ = [
    "Function",
    "Tape",
    "Tensor",
    "as_tensor",
    "backward",
    "debug_checks",
    "grad_enabled",
    "no_grad",
    "set_debug_checks",
]

_debug_checks = ContextVar("dgnflow_debug_checks", default=False)
_grad_enabled = ContextVar("dgnflow_grad_enabled", default=True)


def set_debug_checks(enabled):
    """Switch finite-value checks on every function output on or off."""
    _debug_checks.set(bool(enabled))


@contextmanager
def debug_checks(enabled=True):
    """Context manager enabling finite-value checks on function outputs.

    A :class:`~dgnflow.errors.NonFiniteError` naming the offending function is
    raised as soon as a NaN or Inf is produced.
    """
    token = _debug_checks.set(bool(enabled))
    try:
        yield
    finally:
        _debug_checks.reset(token)


@contextmanager
def no_grad():
    """Context manager in which no operations are recorded."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def grad_enabled():
    return _grad_enabled.get()


def _as_2d(data, dtype=None):
    arr = np.asarray(data, dtype=dtype)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError("Tensor", arr.shape)
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    return arr


class Tensor:
    """Dense 2-D array participating in automatic differentiation.

    Parameters
    ----------
    data : array_like
        Values. Scalars become 1x1 and 1-D arrays become a single row.
        Non-floating input is converted to float64.
    requires_grad : bool, optional
        Whether gradients are accumulated into :attr:`grad`, by default False
    dtype : numpy dtype, optional
        Cast ``data`` to this dtype.
    name : str, optional
        Label shown in the representation.

    Attributes
    ----------
    data : numpy.ndarray
        2-D array of values.
    grad : numpy.ndarray or None
        Gradient accumulated by :func:`backward`, same shape as ``data``.
    creator : Function or None
        Function that produced this tensor, None for leaf tensors.
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, dtype=None, name=None, creator=None):
        self.data = _as_2d(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.creator = creator
        self.name = name

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return (
            f"Tensor{label}(shape={self.shape}, dtype={self.dtype}, "
            f"requires_grad={self.requires_grad})"
        )

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return self.creator is None

    @property
    def T(self):  # noqa: N802
        from dgnflow.autodiff.functions import Transpose

        return Transpose.apply(self)

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ShapeError("item", self.shape, (1, 1))
        return float(self.data[0, 0])

    def detach(self):
        """New leaf tensor sharing the values but not the history."""
        return Tensor(self.data, requires_grad=False, name=self.name)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def _coerce(self, other):
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.dtype))

    def __add__(self, other):
        from dgnflow.autodiff.functions import Add

        return Add.apply(self, self._coerce(other))

    def __radd__(self, other):
        from dgnflow.autodiff.functions import Add

        return Add.apply(self._coerce(other), self)

    def __sub__(self, other):
        from dgnflow.autodiff.functions import Sub

        return Sub.apply(self, self._coerce(other))

    def __rsub__(self, other):
        from dgnflow.autodiff.functions import Sub

        return Sub.apply(self._coerce(other), self)

    def __mul__(self, other):
        from dgnflow.autodiff.functions import Mul

        return Mul.apply(self, self._coerce(other))

    def __rmul__(self, other):
        from dgnflow.autodiff.functions import Mul

        return Mul.apply(self._coerce(other), self)

    def __truediv__(self, other):
        from dgnflow.autodiff.functions import Div

        return Div.apply(self, self._coerce(other))

    def __rtruediv__(self, other):
        from dgnflow.autodiff.functions import Div

        return Div.apply(self._coerce(other), self)

    def __neg__(self):
        from dgnflow.autodiff.functions import Neg

        return Neg.apply(self)

    def __matmul__(self, other):
        from dgnflow.autodiff.functions import MatMul

        return MatMul.apply(self, self._coerce(other))

    def __getitem__(self, key):
        from dgnflow.autodiff.functions import Slice

        return Slice.apply(self, key=key)

    def sum(self, axis=None):
        from dgnflow.autodiff.functions import Sum

        return Sum.apply(self, axis=axis)

    def mean(self, axis=None):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / count)


def as_tensor(value, dtype=None):
    """Return ``value`` unchanged if it is a Tensor, else wrap it."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype=dtype)


class Function:
    """Differentiable operation on tensors.

    Subclasses implement :meth:`forward` on numpy arrays and :meth:`backward`
    returning one gradient (or None) per input. Keyword arguments given to
    :meth:`apply` are passed to the subclass constructor.
    """

    def __init__(self):
        self.inputs = ()
        self.needs_input_grad = ()

    def __repr__(self):
        return f"{type(self).__name__}()"

    def forward(self, *arrays):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs, **kwargs):
        fn = cls(**kwargs)
        tensors = tuple(as_tensor(t) for t in inputs)
        out = fn.forward(*(t.data for t in tensors))
        if _debug_checks.get() and not np.all(np.isfinite(out)):
            raise NonFiniteError(f"{cls.__name__} produced non-finite values")
        requires_grad = _grad_enabled.get() and any(t.requires_grad for t in tensors)
        if not requires_grad:
            return Tensor(out)
        fn.inputs = tensors
        fn.needs_input_grad = tuple(t.requires_grad for t in tensors)
        return Tensor(out, requires_grad=True, creator=fn)


class Tape:
    """Operations reachable from a root tensor in topological order.

    Every operation appears after the operations producing its inputs.

    Parameters
    ----------
    root : Tensor
        Output from which the history is traced.
    """

    def __init__(self, root):
        self.root = root
        self.operations = self._topological_order(root)

    def __len__(self):
        return len(self.operations)

    def __iter__(self):
        return iter(self.operations)

    @staticmethod
    def _topological_order(root):
        if root.creator is None:
            return []
        order = []
        visited = set()
        stack = [(root.creator, False)]
        while stack:
            fn, expanded = stack.pop()
            if expanded:
                order.append(fn)
                continue
            if id(fn) in visited:
                continue
            visited.add(id(fn))
            stack.append((fn, True))
            for t in reversed(fn.inputs):
                if t.creator is not None and id(t.creator) not in visited:
                    stack.append((t.creator, False))
        return order

    def backward(self, seed):
        """Propagate ``seed`` (gradient of the root) to every leaf tensor."""
        pending = {id(self.root.creator): seed}
        for fn in reversed(self.operations):
            grad = pending.pop(id(fn), None)
            if grad is None:
                continue
            input_grads = fn.backward(grad)
            for t, g, needed in zip(
                fn.inputs, input_grads, fn.needs_input_grad, strict=True
            ):
                if not needed or g is None:
                    continue
                if g.shape != t.shape:
                    raise ShapeError(f"{type(fn).__name__}.backward", g.shape, t.shape)
                if t.creator is None:
                    t.grad = g.copy() if t.grad is None else t.grad + g
                else:
                    key = id(t.creator)
                    pending[key] = g if key not in pending else pending[key] + g


def backward(loss):
    """Accumulate gradients of a scalar ``loss`` into every leaf it depends on.

    Parameters
    ----------
    loss : Tensor
        1x1 tensor produced by recorded operations.

    Raises
    ------
    ShapeError
        If ``loss`` is not a scalar.
    RuntimeError
        If ``loss`` does not depend on any tensor requiring gradients.
    """
    if loss.shape != (1, 1):
        raise ShapeError("backward", loss.shape, (1, 1))
    if not loss.requires_grad:
        raise RuntimeError("loss does not depend on any tensor requiring gradients")
    seed = np.ones_like(loss.data)
    if loss.creator is None:
        loss.grad = seed if loss.grad is None else loss.grad + seed
        return
    Tape(loss).backward(seed)
