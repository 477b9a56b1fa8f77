"""Exception types shared across the package."""


class GridMismatchError(ValueError):
    """Momentum does not lie on the k-grid modulo reciprocal lattice vectors."""


class NotFlatError(RuntimeError):
    """Flat-band residual at a momentum exceeds the requested threshold."""


class DegenerateGaugeError(RuntimeError):
    """Chiral gauge rotation is ill-conditioned at this momentum."""


class SearchFailureError(RuntimeError):
    """Magic-coupling search found no sub-tolerance minimum in the interval."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class FlavorMismatchError(ValueError):
    """Density matrix and form-factor table carry incompatible flavors."""


class NotProjectorError(ValueError):
    """Matrix violates the orthogonal-projector invariants."""


class NoInvertibleShiftError(RuntimeError):
    """No reciprocal shift makes the step form factor invertible."""


class SingularStepError(RuntimeError):
    """A propagation step matrix is numerically singular."""


class DimensionCapError(ValueError):
    """Requested Fock space exceeds the desk-scale dimension cap."""


class ConventionError(RuntimeError):
    """A structural validation tied to a basis convention failed."""


class ConfigError(ValueError):
    """Configuration file is malformed or violates an invariant."""


class CacheError(RuntimeError):
    """Cache file is corrupt (bad magic, checksum, or truncation)."""


class ValidationError(RuntimeError):
    """A pipeline validation check failed."""
