"""Exception hierarchy shared by all Ansteckung modules."""


class AnsteckungError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(AnsteckungError):
    """Input data, geometry or configuration violates a documented invariant."""


class SchemaError(ValidationError):
    pass


class GeometryError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class OutOfRegionError(ValidationError):
    def __init__(self, point, message=None):
        self.point = tuple(float(c) for c in point)
        super().__init__(message or f"Point ({self.point[0]:.6g}, {self.point[1]:.6g}) lies outside every tile of the observation region")


class TieBreakingError(ValidationError):
    pass


class SimulationError(AnsteckungError):
    pass


class RejectionSamplingError(SimulationError):
    pass


class InvariantViolation(SimulationError):
    pass


class FitError(AnsteckungError):
    pass


class ConvergenceError(FitError):
    pass


class EnvelopeError(AnsteckungError):
    pass
