"""Exception hierarchy shared by every cura module."""


class CuraError(Exception):
    """Base class for all errors raised by cura."""


class ShapeError(CuraError, ValueError):
    """Operand shapes are incompatible."""


class ParameterError(CuraError, ValueError):
    """An argument value is outside its allowed set or range."""


class UsageError(CuraError, ValueError):
    """An API was called in a way its contract does not permit."""


class DegenerateError(UsageError):
    """Input has no variance where variance is required."""


class InsufficientDataError(UsageError):
    """Too few rows to build a single sample."""


class SchemaError(CuraError, KeyError):
    """A requested column does not exist."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ParseError(CuraError, ValueError):
    """A text input could not be parsed; carries the offending line."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DivergenceError(CuraError, RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


class ModelFileError(CuraError, ValueError):
    """Base class for model file load failures."""


class BadMagicError(ModelFileError):
    pass


class UnsupportedVersionError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass
