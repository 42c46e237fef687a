"""High-level run functions shared by the CLI and the HTTP service.

Each function takes a RunConfig and returns a result object carrying CSV
payloads (deterministic %.17g formatting) and a flat report dict.
"""

import dataclasses
import io
from dataclasses import dataclass

import numpy as np

from .background import background_identities, solve_background
from .config import RunConfig
from .coefficients import (
    build_multiplier_and_extend, pointwise_coefficients, rhs_f,
    verify_conditions, zero_gradient,
)
from .fields import Field2D, make_grid, series_from_modes, sobolev_norm
from .gas import GasModel, Nozzle
from .iteration import TransonicProblem, diagnostics, solve_transonic
from .linsolve import assemble, energy_report, solve_linear, solve_with_continuation


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        return "%.17g" % float(x)
    return str(x)


def _csv(header, columns):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def field_csv(field):
    """Schema: x1,x2,value; row-major by x1."""
    x2 = field.x2
    buf = io.StringIO()
    buf.write("x1,x2,value\n")
    for i, x1v in enumerate(field.x1):
        for j, x2v in enumerate(x2):
            buf.write(f"{_fmt(x1v)},{_fmt(x2v)},{_fmt(field.values[i, j])}\n")
    return buf.getvalue()


def report_text(report):
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in report.items())


def build_problem_objects(cfg: RunConfig):
    gas = GasModel(gamma=cfg["gas.gamma"], kappa_gas=cfg["gas.kappa"],
                   c0=cfg["gas.c0"])
    nozzle = Nozzle(n0=cfg["nozzle.n0"], a_quad=cfg["nozzle.a_quad"])
    grid = make_grid(cfg["solver.n1"], cfg["solver.l_ext"])
    return gas, nozzle, grid


def g_series(cfg: RunConfig):
    return series_from_modes(cfg.g_modes, cfg["solver.n2"])


def make_problem(cfg: RunConfig):
    gas, nozzle, grid = build_problem_objects(cfg)
    return TransonicProblem(
        gas=gas, nozzle=nozzle, grid=grid, n2=cfg["solver.n2"],
        g=g_series(cfg),
        eps0=cfg["iter.eps0"], kappa0=cfg["iter.kappa0"],
        tol=cfg["iter.tol"], max_iter=cfg["iter.max_iter"],
        relax=cfg["iter.relax"], mu=cfg["solver.mu"],
        delta_floor=cfg["solver.delta_floor"],
        eps_schedule=tuple(cfg["solver.eps_schedule"]),
        cv=cfg["solver.cv"], linear_tol=cfg["solver.linear_tol"],
    )


# ---------------------------------------------------------------------------

@dataclass
class BackgroundResult:
    csv: str
    report: dict


def run_background(cfg: RunConfig):
    gas, nozzle, grid = build_problem_objects(cfg)
    bg = solve_background(gas, nozzle, grid)
    ident = background_identities(bg, nozzle)
    csv = _csv(
        ["x1", "n", "u_b", "rho_b", "c_b", "mach", "tau", "k_b", "alpha", "d1k_b"],
        [bg.x1, nozzle.radius(bg.x1), bg.u_b, bg.rho_b, np.sqrt(bg.c_b_sq),
         bg.mach, bg.tau, bg.k_b, bg.alpha, bg.d1k_b],
    )
    report = {
        "mach_entry": float(bg.mach[0]),
        "mach_exit": float(bg.mach[-1]),
        "mass_flux": bg.flux,
        "mass_flux_residual": ident.mass_flux_residual,
        "identity_fd_mismatch": ident.fd_vs_closed_form,
        "delta1": ident.delta1,
        "delta2": ident.delta2,
        "n1": grid.n1,
    }
    return BackgroundResult(csv=csv, report=report)


@dataclass
class VerifyResult:
    table: str
    coefficients_csv: str
    report: dict


def run_verify(cfg: RunConfig):
    gas, nozzle, grid = build_problem_objects(cfg)
    bg = solve_background(gas, nozzle, grid)
    n2 = cfg["solver.n2"]
    grad = zero_gradient(grid, n2)
    k_field, b_field = pointwise_coefficients(gas, nozzle, bg, grad)
    f_field = rhs_f(gas, nozzle, bg, grad)
    cs = build_multiplier_and_extend(
        gas, nozzle, bg, grid, k_field, b_field, f_field,
        mu=cfg["solver.mu"], delta_floor=cfg["solver.delta_floor"],
    )
    rep = cs.report
    table = "\n".join(rep.lines()) + "\n"
    report = {"pass": rep.passed, "mu": cs.mu, "k_exit": cs.k_exit,
              "delta_star": rep.delta_star, "nu_star": rep.nu_star,
              "b_norm3": rep.b_norm3}
    for name, val in rep.margins.items():
        report[f"margin.{name}"] = val
    csv = _coefficient_csv(cs)
    return VerifyResult(table=table, coefficients_csv=csv, report=report)


def _coefficient_csv(cs):
    buf = io.StringIO()
    buf.write(f"# mu = {_fmt(cs.mu)}\n# k_exit = {_fmt(cs.k_exit)}\n")
    buf.write(f"# n1 = {cs.grid.n1}\n# n_ext = {cs.grid.n_ext}\n")
    buf.write("x1,x2,k,b,a,alpha_h,rhs\n")
    x2 = cs.hk.x2
    kv = cs.hk.values / cs.h[:, None]
    bv = cs.hb.values / cs.h[:, None]
    for i, x1v in enumerate(cs.grid.nodes):
        for j, x2v in enumerate(x2):
            buf.write(
                f"{_fmt(x1v)},{_fmt(x2v)},{_fmt(kv[i, j])},{_fmt(bv[i, j])},"
                f"{_fmt(cs.a[i])},{_fmt(cs.h_alpha[i])},{_fmt(cs.rhs.values[i, j])}\n"
            )
    return buf.getvalue()


def load_coefficient_csv(text):
    """Rebuild a CoefficientSet from the verify subcommand's CSV dump."""
    from .coefficients import CoefficientSet
    from .fields import Grid1D

    meta = {}
    rows = []
    header = None
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            meta[key.strip()] = float(val)
            continue
        if header is None:
            header = line
            continue
        rows.append([float(p) for p in line.split(",")])
    arr = np.asarray(rows)
    n1 = int(meta["n1"])
    n_ext = int(meta["n_ext"])
    x1 = np.unique(arr[:, 0])
    n_tot = n1 + n_ext
    if len(x1) != n_tot:
        raise ValueError("coefficient CSV grid is inconsistent")
    n2 = len(arr) // n_tot
    dx = float(x1[1] - x1[0])
    grid = Grid1D(n1=n1, n_ext=n_ext, dx=dx, nodes=x1)
    shaped = arr.reshape(n_tot, n2, arr.shape[1])
    a = shaped[:, 0, 4]
    return CoefficientSet(
        grid=grid, n2=n2, h=a.copy(),
        hk=Field2D(x1=x1, values=a[:, None] * shaped[:, :, 2]),
        hb=Field2D(x1=x1, values=a[:, None] * shaped[:, :, 3]),
        h_alpha=shaped[:, 0, 5],
        a=a.copy(),
        rhs=Field2D(x1=x1, values=shaped[:, :, 6]),
        mu=meta["mu"], k_exit=meta["k_exit"],
    )


@dataclass
class SolveLinearResult:
    field_csv: str
    report: dict


def run_solve_linear(cfg: RunConfig, rhs_mode="h", coefficients_csv=None):
    """One frozen-coefficient linear solve.

    The CoefficientSet comes from `coefficients_csv` (a verify-subcommand
    dump) when given, otherwise it is assembled fresh at the background.
    rhs_mode 'h' uses rhs = h(x1) * 1 (the energy-study source); 'g' uses the
    configured entry perturbation's lift source -h g''.
    """
    if coefficients_csv is not None:
        cs = load_coefficient_csv(coefficients_csv)
        report = verify_conditions(cs)
        cs = dataclasses.replace(cs, report=report)
    else:
        gas, nozzle, grid = build_problem_objects(cfg)
        bg = solve_background(gas, nozzle, grid)
        n2 = cfg["solver.n2"]
        grad = zero_gradient(grid, n2)
        k_field, b_field = pointwise_coefficients(gas, nozzle, bg, grad)
        if rhs_mode == "h":
            source = Field2D(x1=grid.x_m, values=np.ones((grid.n1, n2)))
        else:
            from .fields import d2_spectral, series_eval
            g = g_series(cfg)
            x2 = 2.0 * np.pi * np.arange(n2) / n2
            g_dd = d2_spectral(series_eval(g, x2)[None, :], 2)[0]
            source = Field2D(x1=grid.x_m,
                             values=np.repeat(-g_dd[None, :], grid.n1, axis=0))
        cs = build_multiplier_and_extend(
            gas, nozzle, bg, grid, k_field, b_field, source,
            mu=cfg["solver.mu"], delta_floor=cfg["solver.delta_floor"],
        )
    u_m, erep, diffs = solve_with_continuation(
        cs, eps_schedule=tuple(cfg["solver.eps_schedule"]),
        cv=cfg["solver.cv"], linear_tol=cfg["solver.linear_tol"],
    )
    report = {
        "energy_eps": erep.eps,
        "energy_lhs": erep.lhs,
        "energy_rhs": erep.rhs_norm,
        "energy_ratio": erep.ratio,
        "residual_norm": erep.residual_norm,
        "u_norm1": sobolev_norm(u_m, 1),
        "condition_pass": cs.report.passed,
    }
    for i, d in enumerate(diffs):
        report[f"continuation_diff.{i+1}"] = d
    return SolveLinearResult(field_csv=field_csv(u_m), report=report)


@dataclass
class SolveResult:
    solution_csv: str
    mach_csv: str
    sonic_csv: str
    report: dict


def run_solve(cfg: RunConfig):
    problem = make_problem(cfg)
    sol, rep = solve_transonic(problem)
    bg = solve_background(problem.gas, problem.nozzle, problem.grid)
    diag = diagnostics(problem, bg, sol)
    report = rep.as_key_values()
    report["sonic_displacement_max"] = diag.sonic_displacement_max
    report["k_sign_changes_min"] = int(np.min(diag.k_sign_changes))
    report["k_sign_changes_max"] = int(np.max(diag.k_sign_changes))
    sonic_csv = _csv(["x2", "x1_sonic"],
                     [sol.mach_field.x2, sol.sonic_line])
    return SolveResult(
        solution_csv=field_csv(sol.phi_hat),
        mach_csv=field_csv(sol.mach_field),
        sonic_csv=sonic_csv,
        report=report,
    )


@dataclass
class SweepResult:
    table_csv: str
    rows: list
    report: dict


def run_sweep(cfg: RunConfig, eps_list):
    """Stability-ratio sweep: the configured g shape (default cos(x2)) is
    rescaled to amplitude eps for each entry of eps_list. Independent runs
    fan out over at most run.workers threads; results keep list order."""
    from concurrent.futures import ThreadPoolExecutor

    shape = dict(cfg.g_modes) or {1: 1.0}
    peak = max(abs(v) for v in shape.values())

    def one(eps):
        modes = {m: eps * v / peak for m, v in shape.items()}
        sub = RunConfig(values=dict(cfg.values), g_modes=modes,
                        defaulted=cfg.defaulted)
        sol, rep = solve_transonic(make_problem(sub))
        return {
            "eps": eps,
            "g_norm5": sol.g_norm5,
            "phi_hat_norm4": sol.phi_hat_norm4,
            "stability_ratio": sol.stability_ratio,
            "iterations": rep.iterations,
            "max_contraction_ratio":
                max(rep.contraction_ratios) if rep.contraction_ratios else 0.0,
            "sonic_displacement_max":
                float(np.nanmax(np.abs(sol.sonic_line))),
        }

    workers = max(1, int(cfg["run.workers"]))
    if workers == 1:
        rows = [one(eps) for eps in eps_list]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, eps_list))
    header = list(rows[0].keys())
    table = _csv(header, [[r[k] for r in rows] for k in header])
    ratios = [r["stability_ratio"] for r in rows]
    report = {
        "n_runs": len(rows),
        "ratio_min": min(ratios),
        "ratio_max": max(ratios),
        "ratio_spread": (max(ratios) - min(ratios)) / max(ratios)
        if max(ratios) > 0 else 0.0,
    }
    return SweepResult(table_csv=table, rows=rows, report=report)
