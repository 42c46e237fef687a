"""Picard iteration for the nonlinear transonic problem.

Given the entry perturbation g(x2), iterate the frozen-coefficient map:
freeze k, b, f at the current iterate phi_n = phi_b + phi_hat_n, solve the
multiplied linear problem for the lifted unknown

    (h M_phi)(phi_bar) = h (f(D phi) - g''(x2)),   phi_bar = 0 at entry,

and set phi_hat_{n+1} = phi_bar + g. Convergence is monitored in the
discrete H^3 norm, containment in H^4 (the iterate must stay inside the
ball ||phi_hat||_4 <= kappa0).
"""

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .background import solve_background
from .coefficients import (
    GradientField, build_multiplier_and_extend, pointwise_coefficients, rhs_f,
)
from .errors import KappaExceeded, NoConvergence
from .fields import (
    CircleSeries, Field2D, circle_norm, d2_spectral, derivative, field_like,
    l2_norm, series_eval, sobolev_norm,
)
from .gas import bernoulli_state
from .linsolve import (
    CV_TERMINAL, DEFAULT_EPS_SCHEDULE, LINEAR_TOL, solve_terminal,
    solve_with_continuation,
)

DEFAULT_EPS0 = 2e-2
DEFAULT_KAPPA_FACTOR = 10.0
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 50


@dataclass(frozen=True)
class TransonicProblem:
    gas: object
    nozzle: object
    grid: object
    n2: int
    g: CircleSeries
    eps0: float = DEFAULT_EPS0
    kappa0: float = DEFAULT_KAPPA_FACTOR * DEFAULT_EPS0
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    relax: float = 1.0
    mu: float = 0.05
    delta_floor: float = 0.1
    eps_schedule: tuple = DEFAULT_EPS_SCHEDULE
    cv: float = CV_TERMINAL
    linear_tol: float = LINEAR_TOL

    def __post_init__(self):
        eps_measured = circle_norm(self.g, 5)
        if eps_measured > self.eps0:
            raise KappaExceeded(
                f"||g||_5 = {eps_measured:.3e} exceeds eps0 = {self.eps0:.3e}"
            )

    @property
    def epsilon_measured(self):
        return circle_norm(self.g, 5)


@dataclass
class IterationState:
    phi_hat: Field2D
    kappa_measured: float
    step_norms: list = dc_field(default_factory=list)
    contraction_ratios: list = dc_field(default_factory=list)
    condition_report: object = None
    energy_report: object = None
    continuation_diffs: list = dc_field(default_factory=list)
    iterations: int = 0


@dataclass(frozen=True)
class TransonicSolution:
    phi_hat: Field2D            # on M
    phi_b: np.ndarray
    mach_field: Field2D
    sonic_line: np.ndarray      # x1 of the Mach-1 crossing per x2 node
    equation_residual: float    # discrete perturbation-equation residual, L2
    mass_residual: float        # divergence-form mass residual, L2
    stability_ratio: float      # ||phi_hat||_4 / ||g||_5 (0 when g = 0)
    g_norm5: float
    phi_hat_norm4: float
    k_sign_changes: np.ndarray  # crossings of k(D phi) per x2 row


@dataclass
class SolveReport:
    iterations: int = 0
    converged: bool = False
    step_norms: list = dc_field(default_factory=list)
    contraction_ratios: list = dc_field(default_factory=list)
    kappa_history: list = dc_field(default_factory=list)
    condition_margins: dict = dc_field(default_factory=dict)
    condition_pass: bool = False
    delta_star: float = float("nan")
    nu_star: float = float("nan")
    b_norm3: float = float("nan")
    energy_eps: float = float("nan")
    energy_lhs: float = float("nan")
    energy_rhs: float = float("nan")
    energy_ratio: float = float("nan")
    continuation_diffs: list = dc_field(default_factory=list)
    equation_residual: float = float("nan")
    mass_residual: float = float("nan")
    stability_ratio: float = float("nan")
    g_norm5: float = float("nan")
    phi_hat_norm4: float = float("nan")
    mach_entry: float = float("nan")
    mach_exit: float = float("nan")
    wall_time: float = 0.0

    def as_key_values(self):
        out = {
            "iterations": self.iterations,
            "converged": str(self.converged).lower(),
            "condition_pass": str(self.condition_pass).lower(),
            "delta_star": self.delta_star,
            "nu_star": self.nu_star,
            "b_norm3": self.b_norm3,
            "energy_eps": self.energy_eps,
            "energy_lhs": self.energy_lhs,
            "energy_rhs": self.energy_rhs,
            "energy_ratio": self.energy_ratio,
            "equation_residual": self.equation_residual,
            "mass_residual": self.mass_residual,
            "stability_ratio": self.stability_ratio,
            "g_norm5": self.g_norm5,
            "phi_hat_norm4": self.phi_hat_norm4,
            "mach_entry": self.mach_entry,
            "mach_exit": self.mach_exit,
            "wall_time_s": round(self.wall_time, 3),
        }
        for name, val in self.condition_margins.items():
            out[f"margin.{name}"] = val
        for i, v in enumerate(self.step_norms):
            out[f"step_norm.{i+1}"] = v
        for i, v in enumerate(self.contraction_ratios):
            out[f"contraction_ratio.{i+1}"] = v
        for i, v in enumerate(self.continuation_diffs):
            out[f"continuation_diff.{i+1}"] = v
        return out


def lift_boundary(g, grid, n2):
    """x1-constant lift of the entry data: phi_hat_0(x1, x2) = g(x2)."""
    x2 = 2.0 * np.pi * np.arange(n2) / n2
    row = series_eval(g, x2)
    vals = np.tile(row, (grid.n1, 1))
    return Field2D(x1=grid.x_m, values=vals)


def _freeze_coefficients(problem, bg, phi_hat, g_dd_row):
    """CoefficientSet at the frozen iterate, including the lift source."""
    grad = GradientField(
        d1=derivative(phi_hat, 1, 0),
        d2=derivative(phi_hat, 0, 1),
    )
    k_field, b_field = pointwise_coefficients(problem.gas, problem.nozzle, bg, grad)
    f_field = rhs_f(problem.gas, problem.nozzle, bg, grad)
    source = field_like(f_field, f_field.values - g_dd_row[None, :])
    return build_multiplier_and_extend(
        problem.gas, problem.nozzle, bg, problem.grid, k_field, b_field,
        source, mu=problem.mu, delta_floor=problem.delta_floor,
    )


def picard_step(state, problem, bg=None, with_continuation=False):
    """One application of the frozen-coefficient map T."""
    if bg is None:
        bg = solve_background(problem.gas, problem.nozzle, problem.grid)
    n2 = problem.n2
    x2 = 2.0 * np.pi * np.arange(n2) / n2
    g_row = series_eval(problem.g, x2)
    g_dd = d2_spectral(g_row[None, :], 2)[0]

    cs = _freeze_coefficients(problem, bg, state.phi_hat, g_dd)
    if with_continuation:
        phi_bar, energy, diffs = solve_with_continuation(
            cs, eps_schedule=problem.eps_schedule, cv=problem.cv,
            linear_tol=problem.linear_tol,
        )
    else:
        phi_bar, _ = solve_terminal(cs, cv=problem.cv,
                                    linear_tol=problem.linear_tol)
        energy, diffs = state.energy_report, state.continuation_diffs

    new_vals = phi_bar.values + g_row[None, :]
    if problem.relax != 1.0:
        new_vals = (1.0 - problem.relax) * state.phi_hat.values \
            + problem.relax * new_vals
    phi_new = Field2D(x1=state.phi_hat.x1, values=new_vals)

    step = sobolev_norm(
        Field2D(x1=phi_new.x1, values=phi_new.values - state.phi_hat.values), 3
    )
    kappa = sobolev_norm(phi_new, 4)
    if kappa > problem.kappa0:
        raise KappaExceeded(
            f"||phi_hat||_4 = {kappa:.3e} left the ball kappa0 = "
            f"{problem.kappa0:.3e} (entry data too large for this grid/gas)"
        )

    new_state = IterationState(
        phi_hat=phi_new,
        kappa_measured=kappa,
        step_norms=state.step_norms + [step],
        contraction_ratios=list(state.contraction_ratios),
        condition_report=cs.report,
        energy_report=energy,
        continuation_diffs=list(diffs),
        iterations=state.iterations + 1,
    )
    if len(new_state.step_norms) >= 2 and new_state.step_norms[-2] > 0:
        new_state.contraction_ratios.append(
            new_state.step_norms[-1] / new_state.step_norms[-2]
        )
    return new_state


def solve_transonic(problem):
    """Run the Picard loop to the fixed point and assemble diagnostics."""
    t0 = time.perf_counter()
    bg = solve_background(problem.gas, problem.nozzle, problem.grid)
    g_norm5 = circle_norm(problem.g, 5)
    stop = problem.tol * max(1.0, g_norm5)

    state = IterationState(
        phi_hat=lift_boundary(problem.g, problem.grid, problem.n2),
        kappa_measured=0.0,
    )
    converged = False
    for it in range(problem.max_iter):
        state = picard_step(state, problem, bg=bg,
                            with_continuation=(it == 0))
        if state.step_norms[-1] <= stop:
            converged = True
            break
    if not converged:
        raise NoConvergence(
            f"no fixed point within {problem.max_iter} iterations; "
            f"last step {state.step_norms[-1]:.3e}",
            step_norms=state.step_norms,
        )

    sol = _build_solution(problem, bg, state, g_norm5)
    report = _build_report(problem, state, sol, time.perf_counter() - t0, bg)
    return sol, report


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def _total_state(problem, bg, phi_hat):
    """Total-flow state with the background entering through its stored
    arrays (exact at the throat) and only phi_hat differentiated."""
    n = problem.nozzle.radius(bg.x1)[:, None]
    d1 = bg.u_b[:, None] + derivative(phi_hat, 1, 0).values
    d2 = derivative(phi_hat, 0, 1).values
    q_sq = d1**2 + d2**2 / n**2
    rho, c_sq = bernoulli_state(problem.gas, q_sq)
    return n, d1, d2, q_sq, rho, c_sq


def _sonic_line(x1, signal):
    """Per x2 column: x1 of the sign change of signal = c^2 - q^2, by linear
    interpolation; also count the crossings."""
    s = signal
    n1, n2 = s.shape
    xs = np.full(n2, np.nan)
    counts = np.zeros(n2, dtype=int)
    for j in range(n2):
        col = s[:, j]
        sign_change = np.where(col[:-1] * col[1:] < 0.0)[0]
        exact = np.where(col == 0.0)[0]
        counts[j] = len(sign_change) + len(exact)
        if len(exact):
            xs[j] = x1[exact[0]]
        elif len(sign_change):
            i = sign_change[0]
            t = col[i] / (col[i] - col[i + 1])
            xs[j] = x1[i] + t * (x1[i + 1] - x1[i])
    return xs, counts


def equation_residual(problem, bg, phi_hat):
    """L2 (interior) residual of the frozen-form perturbation equation at
    the converged iterate, with the package's own derivative operators."""
    grad = GradientField(
        d1=derivative(phi_hat, 1, 0),
        d2=derivative(phi_hat, 0, 1),
    )
    k_field, b_field = pointwise_coefficients(problem.gas, problem.nozzle, bg, grad)
    f_field = rhs_f(problem.gas, problem.nozzle, bg, grad)
    res = (
        k_field.values * derivative(phi_hat, 2, 0).values
        + b_field.values * derivative(phi_hat, 1, 1).values
        + derivative(phi_hat, 0, 2).values
        - bg.alpha[:, None] * derivative(phi_hat, 1, 0).values
        - f_field.values
    )
    interior = Field2D(x1=phi_hat.x1[1:-1], values=res[1:-1])
    return l2_norm(interior)


def mass_residual(problem, bg, phi_hat):
    """L2 norm of d1(rho n d1 phi) + d2(rho d2 phi / n), the n-weighted
    divergence form of mass conservation, computed from the potential field
    itself (both the trapezoid background potential and phi_hat are
    re-differentiated, so the background contributes honest truncation
    error). The two rows at each end are excluded: composing the one-sided
    closures there costs an order and would pollute refinement studies."""
    n = problem.nozzle.radius(bg.x1)[:, None]
    phi_field = Field2D(x1=bg.x1,
                        values=bg.phi_b[:, None] + phi_hat.values)
    d1 = derivative(phi_field, 1, 0).values
    d2 = derivative(phi_field, 0, 1).values
    q_sq = d1**2 + d2**2 / n**2
    rho, _ = bernoulli_state(problem.gas, q_sq)
    flux1 = Field2D(x1=bg.x1, values=rho * n * d1)
    flux2 = Field2D(x1=bg.x1, values=rho * d2 / n)
    res = derivative(flux1, 1, 0).values + derivative(flux2, 0, 1).values
    return l2_norm(Field2D(x1=bg.x1[2:-2], values=res[2:-2]))


def _build_solution(problem, bg, state, g_norm5):
    phi_hat = state.phi_hat
    n, d1, d2, q_sq, rho, c_sq = _total_state(problem, bg, phi_hat)
    mach = Field2D(x1=bg.x1, values=np.sqrt(q_sq / c_sq))
    sonic, _ = _sonic_line(bg.x1, c_sq - q_sq)

    # k(D phi) crossings per row, for the type-transition diagnostic
    grad = GradientField(
        d1=derivative(phi_hat, 1, 0), d2=derivative(phi_hat, 0, 1)
    )
    k_field, _ = pointwise_coefficients(problem.gas, problem.nozzle, bg, grad)
    _, k_counts = _sonic_line(bg.x1, k_field.values)

    phn4 = sobolev_norm(phi_hat, 4)
    ratio = phn4 / g_norm5 if g_norm5 > 0 else 0.0
    return TransonicSolution(
        phi_hat=phi_hat,
        phi_b=bg.phi_b,
        mach_field=mach,
        sonic_line=sonic,
        equation_residual=equation_residual(problem, bg, phi_hat),
        mass_residual=mass_residual(problem, bg, phi_hat),
        stability_ratio=ratio,
        g_norm5=g_norm5,
        phi_hat_norm4=phn4,
        k_sign_changes=k_counts,
    )


def _build_report(problem, state, sol, wall_time, bg):
    rep = SolveReport(
        iterations=state.iterations,
        converged=True,
        step_norms=list(state.step_norms),
        contraction_ratios=list(state.contraction_ratios),
        kappa_history=[state.kappa_measured],
        equation_residual=sol.equation_residual,
        mass_residual=sol.mass_residual,
        stability_ratio=sol.stability_ratio,
        g_norm5=sol.g_norm5,
        phi_hat_norm4=sol.phi_hat_norm4,
        mach_entry=float(bg.mach[0]),
        mach_exit=float(bg.mach[-1]),
        wall_time=wall_time,
    )
    if state.condition_report is not None:
        rep.condition_margins = dict(state.condition_report.margins)
        rep.condition_pass = state.condition_report.passed
        rep.delta_star = state.condition_report.delta_star
        rep.nu_star = state.condition_report.nu_star
        rep.b_norm3 = state.condition_report.b_norm3
    if state.energy_report is not None:
        rep.energy_eps = state.energy_report.eps
        rep.energy_lhs = state.energy_report.lhs
        rep.energy_rhs = state.energy_report.rhs_norm
        rep.energy_ratio = state.energy_report.ratio
    rep.continuation_diffs = list(state.continuation_diffs)
    return rep


@dataclass(frozen=True)
class DiagnosticsTable:
    mass_residual: float
    sonic_line: np.ndarray
    sonic_displacement_max: float
    entry_tangential: np.ndarray  # d2 phi / n at the entry slice
    k_sign_changes: np.ndarray


def diagnostics(problem, bg, sol):
    """Post-solution diagnostics for reporting."""
    n_entry = float(problem.nozzle.radius(-1.0))
    d2 = derivative(sol.phi_hat, 0, 1).values[0]
    return DiagnosticsTable(
        mass_residual=sol.mass_residual,
        sonic_line=sol.sonic_line,
        sonic_displacement_max=float(np.nanmax(np.abs(sol.sonic_line))),
        entry_tangential=d2 / n_entry,
        k_sign_changes=sol.k_sign_changes,
    )
