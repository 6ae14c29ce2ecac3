"""Exception hierarchy shared by all nhberry modules."""


class NHBerryError(Exception):
    """Base class for every error raised by nhberry."""

    exit_code = 3


# numeric core
class NonConvergence(NHBerryError):
    pass


class NearDefective(NHBerryError):
    """Eigenvector matrix is too ill-conditioned (close to an exceptional point)."""


class NotPositiveDefinite(NHBerryError):
    pass


class SingularInput(NHBerryError):
    pass


class EvaluationFailure(NHBerryError):
    pass


class DimensionMismatch(NHBerryError):
    pass


# models
class InvalidRadius(NHBerryError):
    pass


# frames
class GapClosure(NHBerryError):
    """Two eigenvalues came closer than the configured gap floor."""


class LostContinuity(NHBerryError):
    pass


# metric
class DegenerateMetric(NHBerryError):
    pass


class StencilCrossesDegeneracy(NHBerryError):
    pass


class SingularS(NHBerryError):
    pass


# connections / topology
class CrossCheckFailure(NHBerryError):
    """Two independent evaluation routes disagree beyond tolerance."""


class NotUnitaryFrame(NHBerryError):
    pass


class NonQuantized(NHBerryError):
    pass


# time evolution
class StepTooLarge(NHBerryError):
    pass


class EvolutionOverflow(NHBerryError):
    pass


class NonAdiabatic(NHBerryError):
    pass


# configuration and files
class ConfigError(NHBerryError):
    exit_code = 2


class ParseError(ConfigError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(ConfigError):
    def __init__(self, field, message=""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class FormatError(NHBerryError):
    exit_code = 2


class NonSquare(FormatError):
    pass


class GridMismatch(FormatError):
    pass
