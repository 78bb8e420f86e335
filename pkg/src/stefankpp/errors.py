"""Exception hierarchy shared by the solvers, verifiers and the CLI."""
from __future__ import annotations


class StefanKPPError(Exception):
    """Base class for every error raised by this package."""


class NonPositiveParameter(StefanKPPError, ValueError):
    def __init__(self, name: str, value: float | None = None):
        self.name = name
        self.value = value
        super().__init__(f"parameter {name!r} must be > 0 (got {value!r})")


class SpeedOutOfRange(StefanKPPError, ValueError):
    pass


class NoConvergence(StefanKPPError, RuntimeError):
    pass


class DeltaTooLarge(StefanKPPError, ValueError):
    pass


class BadInitialData(StefanKPPError, ValueError):
    pass


class CFLViolation(StefanKPPError, ValueError):
    pass


class WindowTooShort(StefanKPPError, ValueError):
    pass


class FrontCollapse(StefanKPPError, RuntimeError):
    pass


class HoleClosed(StefanKPPError, RuntimeError):
    pass


class MarginViolated(StefanKPPError, RuntimeError):
    """The numerical front came too close to a monitored box face.

    ``partial`` holds whatever output the run produced before aborting.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class NoInterface(StefanKPPError, ValueError):
    pass


class OutOfTabulatedRange(StefanKPPError, ValueError):
    pass


class SpecInvariantViolated(StefanKPPError, ValueError):
    pass


class HypothesisViolated(StefanKPPError, ValueError):
    pass


class ConfigError(StefanKPPError, ValueError):
    pass
