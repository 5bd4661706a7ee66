"""Exception types shared across the package."""


class IfltError(Exception):
    """Base class for all package errors."""


class InvalidInput(IfltError, ValueError):
    """An operation received data that violates its preconditions."""


class NotPSD(InvalidInput):
    """A matrix expected to be positive semidefinite has a significantly negative eigenvalue."""


class ParseError(IfltError, ValueError):
    """Serialized data (model JSON, ensemble files, manifests) is malformed."""


class NumericalError(IfltError, ArithmeticError):
    """A numerical update produced non-finite values."""


class ConfigError(IfltError, ValueError):
    """Inconsistent experiment configuration; the message names the offending field."""
