"""Exception types shared across the package."""


class MMDDError(Exception):
    """Base class for all package errors."""


class InvalidArgument(MMDDError, ValueError):
    pass


class NumericFailure(MMDDError, ArithmeticError):
    """A non-finite value appeared; ``step`` locates it when known."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class BufferUnderflow(MMDDError, LookupError):
    """A feature buffer had no entries for the requested class."""


class DegenerateData(MMDDError, ValueError):
    pass


class FormatError(MMDDError, ValueError):
    """Malformed binary file. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(MMDDError, ValueError):
    pass
