"""Exception hierarchy shared across the toolkit."""


class AbmodeError(Exception):
    """Base class for toolkit errors."""


class DomainError(AbmodeError, ValueError):
    """An argument lies outside the domain of the operation."""


class DataError(AbmodeError, ValueError):
    """Input data violate a schema or model precondition.

    ``row`` and ``column`` locate the offending entry when known.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class SpecificationError(AbmodeError, KeyError):
    """A model config references a missing or malformed parameter."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConfigError(AbmodeError, ValueError):
    """A configuration file or option is invalid."""


class EstimationError(AbmodeError, RuntimeError):
    """Likelihood evaluation or optimization could not proceed."""
