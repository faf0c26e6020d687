# Licensed under GPL v3 (see https://www.gnu.org/licenses/).
"""Exceptions raised by the library. The CLI maps them to exit codes."""


class LabError(Exception):
    """Base class for every error raised by hyperbolic_diffusion_lab."""


class ContractViolation(LabError, ValueError):
    """An argument does not satisfy an operation's structural contract."""


class ParameterDomainError(LabError, ValueError):
    """A model parameter lies outside its admissible range."""


class StabilityError(LabError):
    """The explicit scheme refuses a time step. Carries the StabilityReport."""

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"time step {report.dt:g} is unstable: dt_max={report.dt_max:g} "
            f"(cfl_ratio={report.cfl_ratio:.4g}, wave_speed={report.wave_speed:.4g}, "
            f"diffusion_number={report.diffusion_number:.4g})"
        )


class NumericalBlowupError(LabError):
    """A non-finite value appeared while marching."""

    def __init__(self, step_index, detail="non-finite values"):
        self.step_index = step_index
        super().__init__(f"numerical blow-up at step {step_index}: {detail}")


class UnsupportedDomainError(LabError, ValueError):
    """The operation is not defined for this grid (e.g. non-periodic spectral)."""


class SingularMetricError(LabError, ValueError):
    """D⁻¹ does not exist (mass parameter mu = 0)."""


class DegenerateDensityError(LabError, ValueError):
    """A density with zero or negative total mass was supplied."""


class ResolutionError(LabError, ValueError):
    """The grid does not resolve the kernel it is asked to evaluate."""


class FloorDominatedError(LabError):
    """Residuals of a scan sit on the discretization floor."""


class ConfigError(LabError):
    """Invalid experiment configuration. Carries the field path and line."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        location = ""
        if field is not None:
            location = f" [{field}"
            location += f", line {line}]" if line is not None else "]"
        super().__init__(f"{message}{location}")


class SchemaMismatchError(LabError):
    """Two result files do not share the same columns or keys."""

    def __init__(self, only_a, only_b):
        self.only_a = sorted(only_a)
        self.only_b = sorted(only_b)
        super().__init__(
            f"schema mismatch: only in first file {self.only_a}, "
            f"only in second file {self.only_b}"
        )
