"""Exception hierarchy shared across the package."""


class AndersonLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(AndersonLabError):
    """A model/box/experiment configuration violates a structural constraint."""


class UsageError(AndersonLabError):
    """An operation was called outside its contract (wrong state or arguments)."""


class DomainError(AndersonLabError):
    """An argument lies outside the mathematical domain of the operation."""


class CapacityError(AndersonLabError):
    """The problem size exceeds what the requested code path can handle."""


class FitError(AndersonLabError):
    """A regression could not be performed on the available data."""
