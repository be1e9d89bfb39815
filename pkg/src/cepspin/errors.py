"""Exception types raised by the toolkit."""


class CEPError(Exception):
    """Base class for all errors raised by cepspin."""


class DimensionTooLarge(CEPError):
    pass


class NoBrokenBranch(CEPError):
    """The requested PT-broken fixed point does not exist for these parameters."""


class NoConvergence(CEPError):
    pass


class ZeroVector(CEPError):
    pass


class ZeroMeanSpin(CEPError):
    pass


class NonHurwitzJacobian(CEPError):
    """The drift matrix has an eigenvalue with non-negative real part.

    No stationary covariance exists; this is the expected outcome at the
    PT-symmetric (marginal) fixed point.
    """


class SingularSystem(CEPError):
    pass


class AtCriticalPoint(CEPError):
    pass


class FitFailure(CEPError):
    pass


class NonUniqueSteadyState(CEPError):
    pass


class NegativeDensity(CEPError):
    """Steady state has an eigenvalue below the clipping band."""


class InsufficientOverlap(CEPError):
    pass


class PlateauNotResolved(CEPError):
    pass


class DegenerateFrame(CEPError):
    pass


class ConfigError(CEPError):
    pass
