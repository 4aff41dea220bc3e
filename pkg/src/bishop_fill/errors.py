"""Exception hierarchy."""


class BishopFillError(Exception):
    pass


class PreconditionError(BishopFillError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(PreconditionError):
    """Parameters outside the open disc s^2 + t^2 < 1 (or its truncation)."""


class OutOfChartError(DomainError):
    """Point lies in the region V^delta / U^delta, outside the chart."""


class SingularPointError(PreconditionError):
    """Characteristic foliation is singular at the point (a pole q^t_+-)."""


class InvalidContactomorphismError(BishopFillError):
    """Conformal factor non-positive: the flow integration has failed."""


class ChartExcursionError(BishopFillError):
    """Boundary s-coordinate left the leaf-space chart |s| < sqrt(1 - t^2)."""


class SolverFailure(BishopFillError):
    """Gauss-Newton did not reach the residual tolerance."""

    def __init__(self, message, best_residual=float("nan"), iterations=0, kind="divergence",
                 disc=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.iterations = iterations
        # "divergence": the collocation system itself was not solved;
        # "resolution": it was solved, but the truncation tail keeps the residual above tolerance
        self.kind = kind
        self.disc = disc


class ContinuationFailure(BishopFillError):
    """Continuation along a ray failed after the allowed step halvings."""

    def __init__(self, message, frontier=None):
        super().__init__(message)
        self.frontier = frontier or []


class NotNicelyIntersectingError(BishopFillError):
    """Intersection set is not a finite set of isolated points."""


class TotallyRealViolation(BishopFillError):
    """A boundary frame degenerates (complex determinant vanishes)."""


class InsufficientDataError(BishopFillError):
    pass


class IsotopyFailure(BishopFillError):
    pass


class ValidationError(BishopFillError):
    """Configuration failed validation."""
