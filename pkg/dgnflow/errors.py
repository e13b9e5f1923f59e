"""Exceptions raised by dgnflow.

Every error subclasses the builtin a caller would naturally catch, so
``except ValueError`` keeps working around the library.
"""

__all__ = [
    "AllRepeatsFailedError",
    "ConfigError",
    "DivergenceError",
    "FormatError",
    "NonFiniteError",
    "ParameterError",
    "ShapeError",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible."""

    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = shapes
        shown = " and ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {shown}")


class ParameterError(ValueError):
    """A parameter value is outside its valid range."""


class ConfigError(ValueError):
    """An experiment configuration is invalid or contains unknown keys."""


class FormatError(ValueError):
    """A dataset file is malformed.

    Parameters
    ----------
    message : str
        Description of the problem.
    path : str or path-like, optional
        File in which the problem was found.
    line : int, optional
        1-based line number of the offending line.
    """

    def __init__(self, message, path=None, line=None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else f"{self.path}:{line}"
            where += ": "
        super().__init__(f"{where}{message}")


class NonFiniteError(FloatingPointError):
    """NaN or Inf produced while debug checks are enabled."""


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, epoch, loss):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class AllRepeatsFailedError(RuntimeError):
    """Every repeat of an experiment failed."""
