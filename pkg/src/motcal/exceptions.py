"""Exception hierarchy shared by every module of the package."""


class MOTError(Exception):
    """Base class for all errors raised by motcal."""


class ValidationError(MOTError, ValueError):
    """Input data or parameters violate a documented precondition."""


class InvalidDimensionsError(ValidationError):
    pass


class DegenerateDensityError(ValidationError):
    pass


class ZeroMassError(DegenerateDensityError):
    pass


class InsufficientStrikesError(ValidationError):
    pass


class ConvexOrderError(ValidationError):
    """The marginals are not in convex order, so no martingale joins them."""

    def __init__(self, message, strike=None):
        super().__init__(message)
        self.strike = strike


class EmptyMaskError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class NumericalError(MOTError, ArithmeticError):
    """A numerical routine failed to deliver its postcondition."""


class AssemblyError(NumericalError):
    pass


class LinearSolverError(NumericalError):
    pass


class ProjectionError(NumericalError):
    """Safeguarded root search of the K-projection did not converge."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = nodes
