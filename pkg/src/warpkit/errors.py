"""Exception types shared across warpkit modules."""


class WarpKitError(Exception):
    """Base class for all warpkit errors."""


class DomainError(WarpKitError, ValueError):
    """An input value lies outside the mathematical domain of an operation."""


class ShapeError(WarpKitError, ValueError):
    """Array dimensions are inconsistent with what the operation requires."""


class DuplicatePointError(WarpKitError, ValueError):
    """Two destination control points are closer than the separation threshold."""


class NumericalError(WarpKitError, ArithmeticError):
    """A linear solve is singular or too ill-conditioned to trust."""


class ParameterError(WarpKitError, ValueError):
    """Transformation parameters are degenerate (e.g. non-invertible homography)."""


class FormatError(WarpKitError, ValueError):
    """A serialized file violates its schema (strict parsing)."""


class ImageIOError(WarpKitError):
    """An image file could not be read or written."""


class DegenerateLandmarksError(WarpKitError, ValueError):
    """Landmark configuration carries no usable geometry."""


class DivergenceError(WarpKitError, RuntimeError):
    """Optimization diverged; carries the loss trajectory seen so far.

    Attributes:
        trajectory: list of per-iteration loss values up to the abort point.
    """

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = list(trajectory)
