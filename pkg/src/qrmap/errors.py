"""Exception types shared across the qrmap package."""


class QrmapError(Exception):
    """Base class for all qrmap errors."""


class DegenerateTriple(QrmapError):
    """A landmark triple lies within tolerance of a region boundary."""


class AmbiguousLabeling(QrmapError):
    """More than one region labeling satisfies all anchor constraints."""


class InconsistentAnchors(QrmapError):
    """No region labeling satisfies all anchor constraints."""


class BudgetExceeded(QrmapError):
    """The feasibility solver passed its hard rectangle cap."""


class CorruptTable(QrmapError):
    """An operator-table file failed parsing or integrity checks."""


class AnchorMismatch(QrmapError):
    """A loaded composition table disagrees with a known anchor entry."""


class DegenerateObservation(QrmapError):
    """A camera observation is too close to a degenerate configuration."""


class TooFewLandmarks(QrmapError):
    """Fewer than three landmarks are available for triple observations."""


class Contradiction(QrmapError):
    """A fusion step emptied a stored state set (bad association or fault)."""


class MissingEdge(QrmapError):
    """A requested relation references a triple not present in the map."""


class NoPath(QrmapError):
    """The navigation graph does not connect the requested endpoints."""


class StuckDetected(QrmapError):
    """The simulated robot failed to reach a Voronoi cell within budget."""
