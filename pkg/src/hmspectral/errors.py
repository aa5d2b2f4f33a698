"""Exception hierarchy shared by every module of the package."""


class HMError(Exception):
    """Base class for all package errors."""


class RangeError(HMError, ValueError):
    """An index or size lies outside the supported table bounds."""


class DomainError(HMError, ValueError):
    """A point or parameter lies outside the mathematical domain."""


class UsageError(HMError, ValueError):
    """Inconsistent arguments, e.g. fields living on different grids."""


class NumericError(HMError, ArithmeticError):
    """Non-finite values appeared during a computation."""


class ConfigError(HMError, ValueError):
    """A run configuration violates its invariants."""
