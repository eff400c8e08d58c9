"""Errors and warnings raised by sibandit."""


class SibanditError(Exception):
    pass


class ConfigError(SibanditError, ValueError):
    """Invalid experiment configuration. ``field`` is the dotted path of the
    offending entry, or ``None`` when the document as a whole is at fault."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = "{}: {}".format(field, message)
        super().__init__(message)


class BudgetExceededError(SibanditError, RuntimeError):
    pass


class InsufficientDataError(SibanditError, ValueError):
    pass


class SchemaVersionError(SibanditError, ValueError):
    pass


class SibanditWarning(UserWarning):
    pass
