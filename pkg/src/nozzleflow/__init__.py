"""Transonic potential flow in a convergent-divergent nozzle.

Core pipeline: choked quasi-1D background solve, frozen-coefficient
mixed-type linear solves (multiplier, domain extension, vanishing
viscosity), and Picard iteration to the nonlinear fixed point.
"""

__version__ = "0.1.0"

from .background import BackgroundFlow, background_identities, solve_background
from .coefficients import (
    CoefficientSet, ConditionReport, GradientField,
    build_multiplier_and_extend, pointwise_coefficients, rhs_f,
    verify_conditions,
)
from .errors import (
    AdmissibilityError, BranchSolveError, CavitationError, ConditionError,
    ConfigError, ContinuationDivergence, IdentityViolation, KappaExceeded,
    NoConvergence, NozzleFlowError, ParseError, RangeError,
    SingularSystemError, SolverError, TangentialSonicError, UnknownKeyError,
)
from .fields import (
    CircleSeries, Field2D, Grid1D, circle_norm, derivative, make_grid,
    series_from_modes, sobolev_norm,
)
from .gas import GasModel, Nozzle, bernoulli_state, default_gas, default_nozzle, nozzle_eval
from .iteration import (
    IterationState, SolveReport, TransonicProblem, TransonicSolution,
    diagnostics, lift_boundary, picard_step, solve_transonic,
)
from .linsolve import (
    EnergyReport, LinearSystem, assemble, solve_linear, solve_mode0_1d,
    solve_with_continuation,
)
