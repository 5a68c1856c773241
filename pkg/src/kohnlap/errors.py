"""Exception hierarchy.

``ComputationError`` subclasses signal numerical or geometric failures (CLI
exit code 3); ``ConfigError`` signals bad user input (exit code 2).
"""


class KohnLapError(Exception):
    pass


class ConfigError(KohnLapError):
    pass


class ComputationError(KohnLapError):
    pass


class SingularLevi(ComputationError):
    pass


class OffSurface(ComputationError):
    pass


class ChartDomainError(ComputationError):
    pass


class EvaluationError(ComputationError):
    pass


class DegenerateBasis(ComputationError):
    pass


class IndefiniteMass(ComputationError):
    pass


class KernelOverlap(ComputationError):
    pass


class BranchMatchFailure(ComputationError):
    pass


class SurfaceMismatch(ComputationError):
    pass


class NotPSD(ComputationError):
    pass


class KindViolation(ComputationError):
    pass


class NonRealDeformation(ConfigError):
    pass
