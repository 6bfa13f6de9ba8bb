"""Exception hierarchy shared by every module.

CLI exit codes key off these classes: ``FormatError`` maps to 3,
``ConfigError`` and ``NumericDomainError`` to 4.
"""


class SkydiverError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SkydiverError):
    """Shape, topology or schedule inconsistency."""


class NumericDomainError(SkydiverError):
    """Non-finite or out-of-domain numeric input."""


class FormatError(SkydiverError):
    """Malformed or unsupported file contents."""


class BudgetError(SkydiverError):
    """Problem size exceeds an exhaustive-search budget."""
