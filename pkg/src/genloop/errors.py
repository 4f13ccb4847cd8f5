"""Exception types shared across the package.

Each maps to a distinct CLI exit code (see cli.py), so callers can tell
bad input apart from bad configuration or a refused pipeline step.
"""


class GenloopError(Exception):
    """Base class for all package errors."""


class InputError(GenloopError):
    """Malformed or out-of-contract input data (files, ids, sequences)."""


class ConfigError(GenloopError):
    """Invalid configuration values (orders, discounts, beam settings, ...)."""


class LoopHalted(GenloopError):
    """The self-imitation loop refused to continue (e.g. empty filtered pool).

    Carries the reports produced before the halt so partial progress is
    not lost.
    """

    def __init__(self, message, reports=None):
        super().__init__(message)
        self.reports = list(reports or [])


class BridgeError(GenloopError):
    """Protocol or transport failure while talking to an external scorer."""
