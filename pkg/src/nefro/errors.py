"""Exception types raised across the package."""


class NefroError(Exception):
    """Base class for all package errors."""


class PlacementInfeasible(NefroError):
    """Node placement could not satisfy the inter-node distance window."""


class DegreeOutOfRange(NefroError, ValueError):
    pass


class SingularSystem(NefroError):
    """A normal-equation or kernel system is numerically singular."""


class ZeroVariance(NefroError, ValueError):
    pass


class InsufficientDof(NefroError, ValueError):
    pass


class TooFewPoints(NefroError, ValueError):
    pass


class DuplicateCollapse(NefroError):
    """Too many identical points: local reachability density is undefined."""


class DegenerateData(NefroError):
    """Every candidate regression model scores a negative CV R-squared."""


class IncompleteMatrix(NefroError, ValueError):
    """Component comparison needs exactly one report per test scenario."""


class InfeasibleBounds(NefroError, ValueError):
    pass


class NotConverged(NefroError):
    """An evaluation was requested for a solve that did not converge."""


class MissingInput(NefroError):
    """A pipeline stage could not find the artifacts of an earlier stage."""
