"""Exception types for numerical failures raised across the package."""


class PlgError(Exception):
    """Base class for model-level numerical failures."""


class DegenerateVariance(PlgError):
    """A predictive variance collapsed to (or below) the usable floor.

    When raised while filtering a trace, ``t`` holds the index of the
    failing time step.
    """

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class SingularCovariance(PlgError):
    """A covariance matrix is singular at the working tolerance."""


class AsymmetryDetected(PlgError):
    """A matrix that must be symmetric failed its symmetry tolerance."""


class NoSolution(PlgError):
    """A linear system required by a conversion has no usable solution."""


class NegativeSigma2(PlgError):
    """A variance parameter came out negative beyond rounding tolerance."""


class DimensionMismatch(PlgError):
    """Operands describe models of different dimensions."""
