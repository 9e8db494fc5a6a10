"""Exception hierarchy shared across the package.

Configuration problems (bad dimensions, unstable grids, malformed files) are
``ConfigError`` and map to CLI exit code 2.  Failures arising during a valid
computation (noise blowup, singular covariance) are ``NumericalError`` and map
to exit code 3.
"""


class ConfigError(ValueError):
    """A configuration or precondition violation, detected before computing."""


class NumericalError(RuntimeError):
    """A numerical failure in an otherwise valid computation."""


class BlowupError(NumericalError):
    """A replica produced non-finite field values."""


class SingularMatrixError(NumericalError):
    """A covariance matrix required to be invertible is numerically singular."""
