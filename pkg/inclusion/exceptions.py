"""
Error hierarchy for the inclusion solver.
Each class carries the process exit code the runner returns when it escapes.
"""


class InclusionError(Exception):
    """Base class for every failure raised by the inclusion package."""

    exit_code = 1


class ConfigError(InclusionError):
    """Run configuration could not be read or failed validation."""

    exit_code = 2


class MaterialError(ValueError):
    """Non-elliptic Lamé constants or missing material contrast.

    Subclasses ValueError so pydantic validators surface it as a ValidationError.
    """

    exit_code = 2


class AssemblyError(InclusionError):
    """Anything that prevents the block system from being built."""

    exit_code = 3


class GeometryError(AssemblyError):
    """Conformal map data does not describe a simple analytic boundary."""


class DomainError(AssemblyError):
    """Point lies outside the region where a series is valid."""


class SingularPointError(AssemblyError):
    """Map derivative vanishes (|Ψ'| below 1e-12)."""


class WindowTooSmallError(AssemblyError):
    """Requested Laurent coefficient lies outside the exactly computed window."""


class OrderMismatchError(AssemblyError):
    """Finite sections of different truncation orders were combined."""


class ModeError(AssemblyError):
    """Interior quantity requested for a cavity, or cavity quantity for an inclusion."""


class ConvergenceError(InclusionError):
    """Truncated solve left a residual above the configured tolerance."""

    exit_code = 4


class OracleMismatchError(InclusionError):
    """Series solution and boundary-integral oracle disagree beyond tolerance."""

    exit_code = 5


class ReportError(InclusionError):
    """Output file could not be written."""

    exit_code = 6

    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"{path}: {reason}")
