"""Exception types shared across the package."""


class SandpaintError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(SandpaintError):
    """Two rasters (or a raster and a canvas) disagree in shape."""


class NonFiniteGradient(SandpaintError):
    """The analytic backward pass produced NaN or inf entries."""


class NonFiniteLoss(SandpaintError):
    """The training loss became NaN or inf and no checkpoint exists."""


class MissingMask(SandpaintError):
    """A plan manifest references a mask file that does not exist."""


class DuplicateRegionId(SandpaintError):
    """A plan manifest declares the same region id twice."""


class PlanError(SandpaintError):
    """A plan violates a structural invariant (ordering, empty, ...)."""


class UnclassifiedStroke(SandpaintError):
    """A stroke has no region assignment where one is required."""


class IoError(SandpaintError):
    """A frame or snapshot could not be written."""


class DomainError(SandpaintError):
    """A scalar argument lies outside its mathematical domain."""


class SingularDecomposition(SandpaintError):
    """A deformation gradient was too degenerate to decompose."""


class EmptySequence(SandpaintError):
    """A sequence metric received an empty input."""


class DegenerateReference(SandpaintError):
    """The reference image has no texture to compare against."""


class ParticleEscaped(SandpaintError):
    """A particle left the simulation domain (clamped back and counted)."""


class CommandError(SandpaintError):
    """A service command failed validation."""
