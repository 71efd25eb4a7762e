"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An operation was called with inputs violating its contract."""


class CapExceeded(RuntimeError):
    """A bounded search or derivation ran past its budget."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where
