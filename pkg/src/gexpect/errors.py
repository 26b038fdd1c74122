"""Error types shared across the package.

Invalid arguments raise plain :class:`ValueError`; anything that goes wrong
*numerically* (overflow, failed bracket, unstable scheme) raises
:class:`NumericError` so callers (and the CLI) can distinguish usage errors
from numerical failures.
"""


class NumericError(RuntimeError):
    """A computation produced non-finite values or failed to converge."""


class GridExtentError(NumericError):
    """The state grid is too small for the payoff growth.

    Carries a ``suggested_multiplier`` that would make the run admissible.
    """

    def __init__(self, message, suggested_multiplier):
        super().__init__(message)
        self.suggested_multiplier = suggested_multiplier
