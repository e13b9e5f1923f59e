# ruff : noqa: F401
from dgnflow.autodiff.functions import activation, dropout, matmul, row_softmax
from dgnflow.autodiff.gradcheck import grad_check, grad_check_parameters
from dgnflow.autodiff.tensor import (
    Function,
    Tape,
    Tensor,
    as_tensor,
    backward,
    debug_checks,
    no_grad,
    set_debug_checks,
)
