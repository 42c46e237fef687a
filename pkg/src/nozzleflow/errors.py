"""Exception types. Solver errors map to CLI exit code 2, config errors to 1."""


class NozzleFlowError(Exception):
    """Base class for all package errors."""


class SolverError(NozzleFlowError):
    """Base class for typed numerical-pipeline failures (exit code 2)."""


class CavitationError(SolverError):
    """Speed squared reached the vacuum limit 2*c0; density would be nonpositive."""


class TangentialSonicError(SolverError):
    """Shared coefficient denominator c^2 - (d2 phi)^2/n^2 fell below the floor."""


class BranchSolveError(SolverError):
    """Newton/bisection failed to locate a branch root of the mass-flux equation."""


class AdmissibilityError(SolverError):
    """Background violates the admissible-Mach bound tau < 4/(3-gamma)."""


class IdentityViolation(SolverError):
    """A background sign condition failed at some grid node."""


class ConditionError(SolverError):
    """Coefficient preflight failed after the mu / extension adjustment loop."""


class SingularSystemError(SolverError):
    """Linear solve produced an unacceptable residual (near-singular system)."""


class ContinuationDivergence(SolverError):
    """Viscosity-continuation differences grew instead of shrinking."""


class KappaExceeded(SolverError):
    """Picard iterate left the containment ball ||phi_hat||_4 <= kappa0."""


class NoConvergence(SolverError):
    """Picard iteration failed to reach tolerance within max_iter steps."""

    def __init__(self, message, step_norms=None):
        super().__init__(message)
        self.step_norms = list(step_norms or [])


class ConfigError(NozzleFlowError):
    """Base class for configuration problems (exit code 1)."""


class ParseError(ConfigError):
    """Malformed config line; carries the 1-based line number."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class UnknownKeyError(ConfigError):
    """Key not in the strict config schema."""


class RangeError(ConfigError):
    """Key parsed but value is outside its admissible range."""
