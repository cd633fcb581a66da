"""Exception hierarchy shared by all compute modules."""


class ModelError(Exception):
    """Base class for every error raised by the package."""


class ParameterError(ModelError, ValueError):
    pass


class NonPositiveParameter(ParameterError):
    def __init__(self, name, value):
        super().__init__(f"parameter {name!r} must be positive (got {value!r})")
        self.name = name
        self.value = value


class CutoffBelowOmega(ParameterError):
    pass


class OmegaZero(ParameterError):
    pass


class OutsideWeakCoupling(ParameterError):
    pass


class ZeroFrequency(ParameterError):
    pass


class DimensionMismatch(ModelError, ValueError):
    pass


class PositionOutOfRange(ModelError, ValueError):
    pass


class NotPositiveDefinite(ModelError):
    pass


class RootNotBracketed(ModelError):
    pass


class ToleranceNotReached(ModelError):
    pass


class ResonantDenominator(ModelError):
    pass


class QuadratureNotConverged(ModelError):
    pass


class TruncationNotConverged(ModelError):
    pass


class WindowTooNarrow(ModelError):
    pass


class CFLViolation(ModelError, ValueError):
    pass


class OverdampedRegime(ModelError):
    pass


class ReflectionContamination(ModelError):
    pass


class InsufficientHistory(ModelError):
    pass


class ConfigError(ModelError):
    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.key = key


class InternalError(ModelError):
    pass


class ComputeError(ModelError):
    """A numerical failure, tagged with where it happened."""

    def __init__(self, module, operation, cause):
        super().__init__(f"{module}.{operation}: {type(cause).__name__}: {cause}")
        self.module = module
        self.operation = operation
        self.cause = cause
