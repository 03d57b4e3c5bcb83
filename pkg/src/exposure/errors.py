class ExposureError(Exception):
    """Base class for errors raised by this package."""


class DataError(ExposureError):
    """Input data violates the expected format or invariants."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{':'.join(where)}: {message}"
        super().__init__(message)


class ConfigError(ExposureError):
    """Invalid experiment configuration."""
