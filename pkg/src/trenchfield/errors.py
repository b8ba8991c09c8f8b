"""Exception hierarchy.

Every error carries the name of the stage that raised it (``stage``) so the
command-line front end can report where a pipeline failed.
"""


class TrenchfieldError(Exception):
    stage = "trenchfield"


# geometry / config -----------------------------------------------------------

class GeometryError(TrenchfieldError, ValueError):
    stage = "geometry"


class UnknownParameter(GeometryError):
    pass


class NonPositiveLength(GeometryError):
    pass


class SelfIntersectingGeometry(GeometryError):
    pass


class DegeneratePolyline(GeometryError):
    pass


class ConfigError(TrenchfieldError, ValueError):
    stage = "config"


class ParseError(ConfigError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}, column {column or 1})"
        super().__init__(message + where)


class MissingRequiredKey(ConfigError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"missing required key {key!r}")


class UnknownFamily(ConfigError):
    pass


# solver ----------------------------------------------------------------------

class SolverError(TrenchfieldError, ArithmeticError):
    stage = "bem_solver"


class SingularMatrix(SolverError):
    def __init__(self, message, condition=None):
        self.condition = condition
        super().__init__(message)


class MeshTooLarge(SolverError):
    pass


class PointInsideConductor(SolverError):
    pass


class PointTooCloseToBoundary(SolverError):
    pass


# analysis --------------------------------------------------------------------

class AnalysisError(TrenchfieldError, ArithmeticError):
    stage = "analysis"


class NonPositiveHeight(AnalysisError, ValueError):
    stage = "analytic_set"


class NoMinimumFound(AnalysisError):
    stage = "pseudopotential"


class MultipleMinimaInRegion(AnalysisError):
    stage = "pseudopotential"


class NoSaddleFound(AnalysisError):
    stage = "pseudopotential"

    def __init__(self, message, lower_bound=None):
        # depth is at least this large (eV) when the basin is open inside the window
        self.lower_bound = lower_bound
        super().__init__(message)


class NonPositiveCurvature(AnalysisError):
    stage = "pseudopotential"


class FitCircleIntersectsElectrode(AnalysisError):
    stage = "multipole"


class IllConditionedFit(AnalysisError):
    stage = "multipole"


class ZeroQuadrupole(AnalysisError):
    stage = "multipole"


class IonInsideConductor(AnalysisError):
    stage = "optics"


class RegimeMismatch(AnalysisError):
    """The calibrated trap does not sit in the requested separation regime."""
    stage = "sweep"
