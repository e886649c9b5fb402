"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: ParameterError -> 2, DataError -> 3,
NumericError -> 4.
"""


class ParameterError(ValueError):
    """An argument is out of its documented range or the wrong shape."""


class DataError(ValueError):
    """Input data is empty, malformed, or missing a required table."""


class NumericError(RuntimeError):
    """A computation cannot proceed (e.g. a model assigns zero mass everywhere)."""
