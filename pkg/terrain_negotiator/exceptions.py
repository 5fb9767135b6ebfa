"""
Exception types raised by terrain_negotiator.

Built-in exceptions (FileNotFoundError, IndexError, ValueError) are still used
wherever they fit; the classes below cover the domain-specific failures.
"""

from typing import Optional, Sequence


class InvalidArgumentError(ValueError):
    """An argument is non-finite or outside its domain."""


class ConfigError(ValueError):
    """A scenario or experiment config failed validation."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        if path:
            message = f"{message} (in {path})"
        super().__init__(message)


class FormatError(ValueError):
    """A data, model or trace file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path:
            location = f" [{path}"
            if line is not None:
                location += f", line {line}"
            location += "]"
        super().__init__(f"{message}{location}")


class UnsupportedVersionError(FormatError):
    """A file declares a format version this reader does not know."""


class NumericalError(ArithmeticError):
    """Base class for numeric failures (CLI exit code 3)."""


class SingularSystemError(NumericalError):
    """The closed-form column system could not be solved."""

    def __init__(self, policy_index: int, condition: float):
        self.policy_index = policy_index
        self.condition = condition
        super().__init__(
            f"Column system for policy {policy_index} is singular or not positive definite "
            f"(condition number {condition:.3e})"
        )


class NonFiniteObjectiveError(NumericalError):
    """An objective returned NaN or infinity."""

    def __init__(self, point: Sequence[float], value: float):
        self.point = point
        self.value = value
        super().__init__(f"Objective returned {value} at point {list(point)[:8]}...")


class TrainingDivergedError(NumericalError):
    """Training loss exceeded the divergence threshold."""

    def __init__(self, iteration: int, loss: float, policy: Optional[str] = None):
        self.iteration = iteration
        self.loss = loss
        self.policy = policy
        who = f" for policy '{policy}'" if policy else ""
        super().__init__(f"Training diverged{who} at iteration {iteration} (loss {loss:.3e})")


class SolverConsistencyError(NumericalError):
    """The negotiation objective increased beyond the allowed slack."""
