"""Exception types raised by the qdev modules.

Plain argument mistakes raise :class:`ValueError`; the classes below mark
numerical or domain failures that callers (and the CLI exit codes) need to
tell apart.
"""


class QdevError(Exception):
    """Base class for all domain errors."""


class DefinitenessError(QdevError, ValueError):
    """A matrix expected to be positive definite is not."""


class TruncationError(QdevError):
    """The truncated temporal domain is too short for the requested modes."""


class EstimateInvalidError(QdevError, ValueError):
    """T_max lies inside the classically allowed region."""


class SimplicityError(QdevError):
    """Computed eigenvalues are not separated (multiplicity one violated)."""


class UnsupportedChartError(QdevError, ValueError):
    """The operation is not available for the given chart."""


class PreconditionError(QdevError, ValueError):
    """Input violates a documented precondition."""


class ResolutionError(QdevError, ValueError):
    """A sampled field is too coarse for the requested measurement."""


class CapacityError(QdevError, ValueError):
    """Requested family does not fit into the configured grid extent."""


class MatchingError(QdevError, ValueError):
    """Temporal and spatial spectral values do not agree."""


class ConsistencyError(QdevError):
    """Solver output contradicts a proven property (e.g. a negative eigenvalue)."""
