class InvalidParameterError(ValueError):
    """An argument is outside the range an operation accepts."""


class ResourceError(RuntimeError):
    """A requested computation exceeds a configured size cap."""


class ReconstructionError(RuntimeError):
    """A recorded transcript cannot be replayed consistently."""
