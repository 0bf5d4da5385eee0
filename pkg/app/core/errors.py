class InvalidArgumentError(ValueError):
    """Raised when an operation is called with arguments outside its domain."""


class InvariantViolationError(RuntimeError):
    """Raised when a simulated configuration breaks a model invariant."""
