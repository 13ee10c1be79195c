"""Exception hierarchy."""


class GeonetError(Exception):
    pass


class DomainError(GeonetError, ValueError):
    """A point or vector lies outside the domain of an operation."""


class ShootingError(GeonetError):
    """An ODE shot failed: step collapse, escape, missed event, drift."""


class TransversalityError(ShootingError):
    """A geodesic meets the boundary too tangentially to locate the hit reliably."""


class ConvergenceError(GeonetError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigError(GeonetError, ValueError):
    """Invalid run configuration; ``where`` names the offending field or line."""

    def __init__(self, message, where=""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where
