"""Exception hierarchy shared across the package."""


class FlameError(Exception):
    """Base class for all estimation errors."""


class BehindCameraError(FlameError):
    pass


class EmptyCurveError(FlameError):
    pass


class ZeroMidpointError(FlameError):
    pass


class OffCurveError(FlameError):
    pass


class SingularGramError(FlameError):
    pass


class DimensionMismatchError(FlameError):
    pass


class EmptySilhouetteError(FlameError):
    pass


class DegenerateGeometryError(FlameError):
    pass


class InsufficientPointsError(FlameError):
    pass


class EmptyGroupError(FlameError):
    pass
