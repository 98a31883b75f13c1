"""Exception hierarchy shared across the package."""


class LieJetError(Exception):
    """Base class for all errors raised by liejet."""


class ContextMismatchError(LieJetError):
    """Jets from different contexts were combined in one operation."""


class JetDomainError(LieJetError, ValueError):
    """An elementary function was applied outside its smooth domain."""


class ExprError(LieJetError, ValueError):
    """Parse or evaluation error for a runtime expression.

    `offset` is the byte offset into the source string, or -1 when the
    error is not tied to a position.
    """

    def __init__(self, message: str, offset: int = -1):
        super().__init__(message)
        self.offset = offset

    def __str__(self) -> str:
        base = super().__str__()
        if self.offset >= 0:
            return f"{base} (at offset {self.offset})"
        return base


class DomainError(LieJetError, ValueError):
    """A point left the open box a map is defined on."""


class SingularJacobianError(LieJetError):
    """A spatial Jacobian was singular where invertibility is required."""


class ConvergenceError(LieJetError):
    """An iteration (Newton, ODE stepper) failed to reach its tolerance."""


class ConfigError(LieJetError, ValueError):
    """A scenario file or CLI configuration failed validation."""
