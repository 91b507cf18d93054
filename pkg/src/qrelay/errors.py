class DomainError(ValueError):
    """Raised when an argument lies outside the domain an operation accepts."""


class InvariantViolation(RuntimeError):
    """Raised when a computed result breaks a physical invariant."""


class PreconditionError(DomainError):
    """Raised when an input violates a documented precondition (e.g. unsorted tags)."""
