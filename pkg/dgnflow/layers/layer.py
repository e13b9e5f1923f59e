import numpy as np

from dgnflow.autodiff.tensor import Tensor

__all__ = ["Layer", "glorot_init"]


def glorot_init(rows, cols, rng, dtype=np.float64):
    """Glorot (Xavier) uniform initialization.

    Samples are uniform on ``[-a, a]`` with ``a = sqrt(6 / (rows + cols))``.

    Parameters
    ----------
    rows, cols : int
        Shape of the weight matrix.
    rng : numpy.random.Generator
    dtype : numpy dtype, optional
        By default float64

    Returns
    -------
    Tensor
        Trainable ``rows x cols`` tensor.
    """
    bound = np.sqrt(6.0 / (rows + cols))
    data = rng.uniform(-bound, bound, size=(rows, cols)).astype(dtype)
    return Tensor(data, requires_grad=True)


class Layer:
    """Base class of layers and normalizers.

    Trainable tensors are discovered from instance attributes in definition
    order. Subclasses with running statistics list their attribute names in
    ``_buffers``.
    """

    _buffers = ()

    def __repr__(self):
        return f"{type(self).__name__}()"

    def named_parameters(self):
        return [
            (name, value)
            for name, value in vars(self).items()
            if isinstance(value, Tensor) and value.requires_grad
        ]

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        """Copies of all parameter values and running statistics."""
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        for name in self._buffers:
            state[name] = getattr(self, name).copy()
        return state

    def load_state_dict(self, state):
        for name, p in self.named_parameters():
            p.data = state[name].copy()
        for name in self._buffers:
            setattr(self, name, state[name].copy())
