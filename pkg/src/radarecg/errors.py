"""Exception types shared across the toolkit.

Validation problems (bad arguments, malformed inputs) and numerical
failures (divergence, undefined results) are kept distinct so the CLI
can map them to different exit codes.
"""


class ValidationError(ValueError):
    """Input violates a precondition or invariant."""


class NumericalError(ArithmeticError):
    """A computation failed numerically (divergence, undefined result)."""
