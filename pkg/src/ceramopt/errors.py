"""Exception hierarchy shared by all modules."""


class CeramoptError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CeramoptError, ValueError):
    pass


class GeometryError(CeramoptError, ValueError):
    pass


class InvalidDesign(GeometryError):
    pass


class DegenerateGeometry(GeometryError):
    pass


class DegenerateElement(GeometryError):
    pass


class SolverError(CeramoptError, RuntimeError):
    pass


class SolverDiverged(SolverError):
    pass


class SingularSystem(SolverError):
    pass


class NegativeInput(CeramoptError, ValueError):
    pass


class NonUnitNormal(CeramoptError, ValueError):
    pass


class NonpositiveRadius(CeramoptError, ValueError):
    pass


class NegativeIntensity(CeramoptError, ValueError):
    pass


class UnsupportedMeasure(CeramoptError, TypeError):
    pass


class NoAdmissibleStep(CeramoptError, RuntimeError):
    pass
