"""Exception types raised across the package."""


class SsimKdError(ValueError):
    """Base class for all package errors."""


class InvalidInputError(SsimKdError):
    """Input values are unusable (e.g. NaN or Inf in a feature map)."""


class DimensionError(SsimKdError):
    """Shapes are incompatible with the requested operation."""


class InvalidSpecError(SsimKdError):
    """Window parameters are malformed."""


class ConfigError(SsimKdError):
    """A loss or training configuration is out of range."""


class FormatError(SsimKdError):
    """A feature-dump file is malformed.

    ``offset`` is the byte position at which parsing failed.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
