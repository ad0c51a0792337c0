from typing import Literal

import numpy as np
import numpy.typing as npt


class Types:
    Array = npt.NDArray[np.float64]
    Activation = Literal["tanh", "relu", "identity", "ball"]
    OptimizerKind = Literal["sgd", "adam"]
    ProbeKind = Literal["decay", "continuity", "theorem1", "theorem4"]
    SolverName = Literal["power", "power-plain", "exact"]


class Exceptions:
    class DiscganError(Exception):
        """Base class for all errors raised by this package."""

    class ParameterError(DiscganError, ValueError):
        """
        One parameter is of the wrong type or out of range, or two or more passed parameters are in
        mutual conflict.
        """

    class DimensionMismatch(DiscganError, ValueError):
        """Two inputs that must share a dimension (columns, layer sizes, batch shapes) do not."""

    class EmptySample(DiscganError, ValueError):
        """A sample matrix or sample file contains no rows."""

        def __init__(self, message: str = "empty sample"):
            super().__init__(message)

    class AsymmetricMatrix(DiscganError, ValueError):
        """A matrix passed as symmetric is not symmetric within tolerance."""

    class NonFiniteValue(DiscganError, ValueError):
        """A NaN or an infinity was found where finite numbers are required."""

    class UnitBallViolation(DiscganError, ValueError):
        """A sample lies outside the unit ball while the unit-ball check is enabled."""

    class OracleSizeLimit(DiscganError, ValueError):
        """An exhaustive or test-oracle routine was called on an input that is too large."""

    class SampleFormatError(DiscganError, ValueError):
        """A sample file could not be parsed. Carries the offending path and line number."""

        def __init__(self, message: str, path: str | None = None, line: int | None = None):
            location = ""
            if path is not None:
                location = f"{path}:{line}: " if line is not None else f"{path}: "
            elif line is not None:
                location = f"line {line}: "
            super().__init__(f"{location}{message}")
            self.path = path
            self.line = line

    class StaleTape(DiscganError, ValueError):
        """
        A backward pass was requested with an activation tape that was not recorded by a forward
        pass of the same parameters.
        """

    class NumericalAbort(DiscganError, ArithmeticError):
        """
        Training produced a non-finite loss. The step number and the trace recorded up to that point
        are attached so that callers can persist them.
        """

        def __init__(self, message: str, step: int, trace=None):
            super().__init__(message)
            self.step = step
            self.trace = trace
