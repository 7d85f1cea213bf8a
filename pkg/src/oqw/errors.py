"""Exception hierarchy.

``InputError`` covers malformed inputs and violated preconditions (CLI exit
code 1); ``NumericalError`` covers solver breakdowns and inconclusive limits
(CLI exit code 2).
"""


class OQWError(Exception):
    """Base class for package errors."""


class InputError(OQWError, ValueError):
    """Malformed input or violated precondition."""


class ShapeError(InputError):
    """Transition block shape inconsistent with the declared site dimensions."""


class NumericalError(OQWError, RuntimeError):
    """A numerical procedure failed or was inconclusive."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
