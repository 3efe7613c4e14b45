"""Exception types shared across the library."""


class FdlabError(Exception):
    """Base class for all library errors."""


class SingularPointError(FdlabError):
    """Derivative requested on or too close to a non-smooth stratum."""


class DegenerateJacobianError(FdlabError):
    """Distortion requested at a point where the Jacobian vanishes."""


class InversionFailedError(FdlabError):
    """Newton inversion did not reach the residual tolerance."""


class OnNoninjectiveSetError(FdlabError):
    """Inversion target lies on the half-line of non-singleton fibers."""


class SingularMatrixError(FdlabError):
    """Matrix with non-positive determinant where positivity is required."""


class EmptyDomainError(FdlabError):
    """Integration domain has zero measure."""


class InsufficientSamplesError(FdlabError):
    """Trend fit called with fewer than four (eps, value) samples."""


class InsufficientScalesError(FdlabError):
    """Box counting called with too few or too narrow scales."""


class GridTooCoarseError(FdlabError):
    """Occupied voxels touch the bounding box; the grid cannot be trusted."""


class OutOfRangeError(FdlabError):
    """Exponent arguments outside the valid range."""


class DegenerateLevelError(FdlabError):
    """Level c = 0 is a circle, not a surface; export it as a polyline."""
