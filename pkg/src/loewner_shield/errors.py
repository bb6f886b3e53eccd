"""Exception types shared across the library."""


class LoewnerShieldError(Exception):
    """Base class for all library-specific errors."""


class NonFiniteError(LoewnerShieldError):
    """An input contained NaN or Inf entries."""


class DimMismatchError(LoewnerShieldError):
    """Operands have incompatible dimensions."""


class IndexOutOfRangeError(LoewnerShieldError):
    """An eigenvalue index is outside the valid 1..p range."""


class AsymmetricInputError(LoewnerShieldError):
    """A matrix deviates from symmetry by more than the construction tolerance."""


class NotInsideError(LoewnerShieldError):
    """Depth was requested at a point outside the obstacle."""


class SolverFailure(LoewnerShieldError):
    """A conic subproblem failed in a way the caller cannot recover from."""


class DegenerateProjectionError(LoewnerShieldError):
    """The state is too close to the obstacle for the exterior halfspace construction."""


class NoNormalAvailableError(LoewnerShieldError):
    """The boundary normal construction degenerated (e.g. zero direction)."""


class ZeroGradientError(LoewnerShieldError):
    """The depth gradient vanished (flat interior point such as an exact incenter)."""


class NonAffineHError(LoewnerShieldError):
    """The matrix safe-set function is not affine in the controlled coordinates."""


class NoConvergenceError(LoewnerShieldError):
    """A fixed-point iteration failed to converge within its budget."""


class PlantDivergedError(LoewnerShieldError):
    """The simulated state norm exceeded the divergence threshold."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ScenarioParseError(LoewnerShieldError):
    """The scenario file is not valid JSON; carries line/column."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class ScenarioValidationError(LoewnerShieldError):
    """The scenario document violates the schema; carries the offending field."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
