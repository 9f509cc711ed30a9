"""Exception types shared across the package."""


class CGRSError(Exception):
    """Base class for all package errors."""


class ConfigError(CGRSError, ValueError):
    """Bad configuration value or unknown format tag."""


class ParseError(CGRSError, ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ContractError(CGRSError, ValueError):
    """A precondition of an operation was violated by the caller."""


class UndefinedConditionalError(ContractError):
    """Conditional probability requested for an item with zero support."""


class DegenerateProfileError(CGRSError):
    """Virtual profile is empty or too small to split."""


class EmptyProfileError(DegenerateProfileError):
    """Every group item fell at or below the weight threshold."""


class NoHomogeneousGroupError(CGRSError):
    """Group sampling ran out of attempts."""


class RunFailure(CGRSError):
    """An experiment finished without a single evaluated instance."""


class UndefinedMetricError(CGRSError, ValueError):
    """Metric has no defined value for this instance (e.g. nothing relevant)."""
