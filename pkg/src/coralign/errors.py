"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: invalid input or
configuration exits 1, numerical failures exit 2.  Check-mode commands
(e.g. gradient verification) signal failure with exit 3 without raising.
"""


class CoralignError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(CoralignError):
    """Bad shapes, bad argument values, unusable configuration."""


class FormatError(InvalidInputError):
    """A dataset file that cannot be parsed (bad magic, truncation, ragged rows)."""


class NumericalError(CoralignError):
    """A computation produced or received non-finite or otherwise unusable numbers."""


class NotPSDError(NumericalError):
    """A matrix that must be positive semidefinite has a significantly negative eigenvalue."""
