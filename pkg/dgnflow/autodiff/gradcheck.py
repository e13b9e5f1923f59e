"""Central-difference checks of analytic gradients."""

import numpy as np

from dgnflow.autodiff.tensor import Tensor, backward, no_grad
from dgnflow.errors import ParameterError, ShapeError

__all__ = ["grad_check", "grad_check_parameters"]


def _relative_error(analytic, numeric):
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _scalar(out):
    if out.shape != (1, 1):
        raise ShapeError("grad_check", out.shape, (1, 1))
    return out.item()


def grad_check(f, x, eps=1e-6):
    """Maximum relative error between analytic and central-difference gradients.

    The check runs in float64 regardless of the dtype of ``x``.

    Parameters
    ----------
    f : callable
        Maps a Tensor to a 1x1 Tensor.
    x : Tensor or array_like
        Point at which the gradient is checked.
    eps : float, optional
        Finite-difference step, by default 1e-6

    Returns
    -------
    float
        max over elements of ``|a - cd| / max(|a|, |cd|, 1e-8)``.

    Raises
    ------
    ShapeError
        If ``f`` is not scalar-valued.
    """
    if eps <= 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    data = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    xt = Tensor(data.copy(), requires_grad=True)
    out = f(xt)
    _scalar(out)
    if out.requires_grad:
        backward(out)
    analytic = xt.grad if xt.grad is not None else np.zeros_like(data)

    numeric = np.zeros_like(data)
    with no_grad():
        for idx in np.ndindex(*data.shape):
            shifted = data.copy()
            shifted[idx] += eps
            fp = _scalar(f(Tensor(shifted)))
            shifted[idx] -= 2 * eps
            fm = _scalar(f(Tensor(shifted)))
            numeric[idx] = (fp - fm) / (2 * eps)
    return _relative_error(analytic, numeric)


def grad_check_parameters(loss_fn, parameters, eps=1e-6):
    """Check the gradient of ``loss_fn()`` with respect to each parameter.

    Parameters are perturbed in place and restored afterwards, so ``loss_fn``
    should read the current parameter values each time it is called. Use
    float64 parameters.

    Parameters
    ----------
    loss_fn : callable
        Returns a 1x1 Tensor, takes no arguments.
    parameters : list of Tensor
        Leaf tensors with ``requires_grad=True``.
    eps : float, optional
        Finite-difference step, by default 1e-6

    Returns
    -------
    float
        Maximum relative error over all parameter entries.
    """
    for p in parameters:
        p.zero_grad()
    out = loss_fn()
    _scalar(out)
    backward(out)
    worst = 0.0
    with no_grad():
        for p in parameters:
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            numeric = np.zeros_like(p.data)
            original = p.data
            for idx in np.ndindex(*original.shape):
                shifted = original.copy()
                shifted[idx] += eps
                p.data = shifted
                fp = _scalar(loss_fn())
                shifted = original.copy()
                shifted[idx] -= eps
                p.data = shifted
                fm = _scalar(loss_fn())
                numeric[idx] = (fp - fm) / (2 * eps)
            p.data = original
            worst = max(worst, _relative_error(analytic, numeric))
    return worst
