"""Exception hierarchy shared by all modules."""


class PeriodicFMError(Exception):
    """Base class for every error raised by this package."""


class WoodAnomaly(PeriodicFMError, ValueError):
    """Some beta_m vanishes: the quasiperiodic Green's function is undefined."""


class DomainError(PeriodicFMError, ValueError):
    pass


class AliasingError(PeriodicFMError, ValueError):
    pass


class NoConvergence(PeriodicFMError, RuntimeError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class PlaneMismatch(PeriodicFMError, ValueError):
    pass


class EmptySampleSet(PeriodicFMError, ValueError):
    pass


class FormatError(PeriodicFMError, ValueError):
    pass


class TruncatedFile(FormatError):
    pass


class DimensionMismatch(PeriodicFMError, ValueError):
    pass


class DecompositionFailure(PeriodicFMError, RuntimeError):
    pass


class EmptySpectrum(PeriodicFMError, ValueError):
    pass


class ParseError(PeriodicFMError, ValueError):
    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line


class ValidationError(PeriodicFMError, ValueError):
    pass
