"""Exception types shared across the package.

The CLI maps :class:`ValidationError` to exit code 1 and
:class:`NumericalError` to exit code 2; library code raises them directly.
"""


class ValidationError(ValueError):
    """Bad input: malformed config, dimension mismatch, invalid parameter."""


class NumericalError(RuntimeError):
    """Numerical failure: loss overflow, non-convergent inner solve."""
