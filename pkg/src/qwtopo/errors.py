class ValidationError(ValueError):
    """An input lies outside the domain an operation accepts."""


class GapClosedError(ValidationError):
    """The two bands touch, so a gap-dependent quantity is undefined."""
