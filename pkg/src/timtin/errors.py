"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented precondition or invariant."""


class VerificationError(RuntimeError):
    """A claimed result failed its independent re-check."""


class UnsupportedTopologyError(ValidationError):
    """A link pattern falls outside the supported construction registry."""
