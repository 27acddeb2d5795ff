"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage problems exit 1,
`DataFormatError` and `ValidationError` exit 2, `NumericFailure` exits 3.
"""


class ValidationError(ValueError):
    """A domain precondition was violated (bad shapes, lengths, ranges)."""


class DimensionError(ValidationError):
    """Array shapes are incompatible for the requested operation."""


class DataFormatError(ValueError):
    """A file on disk does not conform to its documented format."""


class NumericFailure(ArithmeticError):
    """A computation produced non-finite values and cannot continue."""
