"""Exception hierarchy shared by all oodkit modules.

The CLI maps these onto exit codes: ValidationError -> 1,
FileFormatError (and plain OSError) -> 2, NumericError -> 3.
"""


class OodkitError(Exception):
    """Base class for all oodkit errors."""


class ValidationError(OodkitError):
    """Invalid data, configuration, or argument (invariant violation)."""


class FileFormatError(OodkitError):
    """Unreadable or malformed on-disk container (bad magic, truncation...)."""


class NumericError(OodkitError):
    """Numerical failure, e.g. covariance factorization that cannot be saved."""
