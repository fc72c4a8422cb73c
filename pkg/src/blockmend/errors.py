"""Exception types shared across the package."""


class BlockmendError(Exception):
    """Base class for all package-specific errors."""


class FormatError(BlockmendError):
    """Unreadable or unsupported image/mask file."""


class DimensionMismatchError(BlockmendError):
    """Two rasters that must share dimensions do not."""


class EmptyContextError(BlockmendError):
    """A target patch has no usable context pixel (N_y = 0)."""


class InsufficientCandidatesError(BlockmendError):
    """An estimator needs more candidate windows than were gathered."""


class WeightUnderflowError(BlockmendError):
    """All raw kernel weights underflowed to zero (nu = 0)."""
