"""Typed error hierarchy.

Every failure mode that callers are expected to branch on gets its own
exception class; the CLI maps these onto stable exit codes.
"""


class PhotocoolError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(PhotocoolError, ValueError):
    """A parameter violates its declared domain (sign, range, units)."""


class DegenerateDetuningError(PhotocoolError, ValueError):
    """Operation undefined at zero pump-cavity detuning."""


class HeatingRegimeError(PhotocoolError):
    """Force gradient is non-positive: the feedback heats instead of cooling."""


class InstabilityError(PhotocoolError):
    """Static instability: force gradient reaches or exceeds m*omega_m^2."""


class GridTooCoarseError(PhotocoolError, ValueError):
    """Frequency grid does not resolve the mechanical resonance."""


class NegativeOccupancyError(PhotocoolError):
    """Integrated spectrum implies an occupancy below the zero-point floor."""


class NonstationaryTrajectoryError(PhotocoolError):
    """First/second half statistics of a trajectory disagree beyond 3 sigma."""


class TooFewSegmentsError(PhotocoolError, ValueError):
    """Welch estimate requested with fewer than the minimum segments."""


class SimulationAbortError(PhotocoolError):
    """Integrator produced a non-finite state; diagnostic in the message."""


class NoFeasiblePointError(PhotocoolError):
    """Constrained optimization never found a stable, cooling parameter set."""


class FitDivergedError(PhotocoolError):
    """Damped least-squares loop failed to converge within its iteration cap."""


class UnderdeterminedFitError(PhotocoolError, ValueError):
    """Fewer data rows than free parameters."""


class ConfigValidationError(PhotocoolError, ValueError):
    """Device config failed schema validation; message lists field and reason."""


class DatasetParseError(PhotocoolError, ValueError):
    """Dataset file could not be parsed; message carries the line number."""
