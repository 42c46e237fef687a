"""Discretization and solve of the regularized mixed-type linear problem

    (hk) d11 u + (hb) d12 u + a d22 u - (h alpha) d1 u + eps d111 u = rhs

on the extended domain, with u = 0 and (for eps > 0) d1 u = 0 at the entry
and d1 u = 0 at the extended exit.

Scheme notes, from the stabilization study for this operator:

* x1 stencils are second-order central; the third derivative uses the
  compact backward-biased form D- o D2 = (u_{i+1} - 3u_i + 3u_{i-1} -
  u_{i-2})/dx^3, which grips the grid's sawtooth mode (the pure central form
  annihilates it and the system becomes resonant near the sonic line).
* where k < 0 the second-difference term anti-diffuses grid-scale modes, so
  a fourth-difference dissipation with coefficient ~ |hk| dx^2 (smoothly
  floored so it never vanishes at sonic lines) is applied; it is an O(dx^2)
  consistent perturbation, the same order as the stencil truncation error.
* the extension re-crosses k = 0 with the wrong slope sign, which sheds
  grid noise; a sponge (strong high-frequency absorber confined to the
  extension) swallows it before it can travel back into the physical domain.
* the eps -> 0 limit is represented by a terminal solve whose viscosity is
  co-scaled with the grid, eps_term = cv*dx^2, and ramped to zero at the
  entry so the second entry condition (a boundary-layer artifact of the
  regularization) is not imposed there.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import ContinuationDivergence, SingularSystemError
from .fields import (
    Field2D, d1_matrix, d2_matrix, l2_norm, restrict_to_m, smooth_ramp,
    sobolev_norm,
)

LINEAR_TOL = 1e-10
DEFAULT_EPS_SCHEDULE = (1e-2, 3e-3, 1e-3, 3e-4)

# stabilization defaults (see module docstring)
CD_DISSIPATION = 0.5
K_FLOOR_REL = 0.15
SPONGE_STRENGTH = 10.0
CV_TERMINAL = 48.0


@dataclass(frozen=True)
class LinearSystem:
    matrix: object            # scipy CSC
    rhs: np.ndarray
    grid: object
    n2: int
    eps: float                # schedule value; 0 for the reduced problem
    terminal: bool
    n_boundary_rows: int


@dataclass(frozen=True)
class EnergyReport:
    eps: float
    lhs: float                # eps ||d11 u||_0^2 + ||u||_1^2
    rhs_norm: float           # ||f||_0^2
    ratio: float
    residual_norm: float


def dealias_coefficient(values):
    """2/3-rule truncation of the x2 spectrum of a coefficient field.
    Exact no-op for x2-independent data."""
    n2 = values.shape[1]
    vhat = np.fft.fft(values, axis=1)
    m = np.abs(np.fft.fftfreq(n2, d=1.0 / n2))
    vhat[:, m > n2 // 3] = 0.0
    return np.real(np.fft.ifft(vhat, axis=1))


# x1 stencils, shared by the 2D assembly and the 1D mode-0 oracle ------------

STENCIL_D1 = ((-1, -0.5), (1, 0.5))                            # / dx
STENCIL_D11 = ((-1, 1.0), (0, -2.0), (1, 1.0))                 # / dx^2
STENCIL_D111 = ((-2, -1.0), (-1, 3.0), (0, -3.0), (1, 1.0))    # / dx^3
STENCIL_D4RAW = ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0))
ENTRY_NEUMANN = ((0, -3.0), (1, 4.0), (2, -1.0))               # / (2 dx)
EXIT_NEUMANN = ((0, 3.0), (-1, -4.0), (-2, 1.0))               # offsets from last node


def dissipation_profile(cs, cd=CD_DISSIPATION, k_floor_rel=K_FLOOR_REL,
                        sponge=SPONGE_STRENGTH):
    """sigma[i]: fourth-difference dissipation coefficient (applied to the
    undivided fourth difference), smooth in x1, extension sponge included."""
    grid = cs.grid
    x = grid.nodes
    dx = grid.dx
    n_tot = grid.n_total
    k_plain = cs.hk.values / cs.h[:, None]
    k_mag = np.abs(k_plain).max(axis=1)
    k_bar = float(k_mag.max())
    k_floor = k_floor_rel * k_bar
    base = cd * cs.h * np.sqrt(k_mag**2 + k_floor**2)
    # the sponge absorbs waves shed where the extension re-crosses k = 0;
    # an all-elliptic set has no crossing and needs none
    hyperbolic = float(np.min(k_plain)) < -1e-12 * k_bar
    sp = np.zeros(n_tot)
    if grid.n_ext > 0 and hyperbolic:
        delta = x[grid.n1:] - 1.0
        sp[grid.n1:] = smooth_ramp((delta / grid.l_ext - 0.05) / 0.25)
    w_dn = smooth_ramp((x[n_tot - 2] - x) / (8.0 * dx))
    return (base + sponge * cs.h * k_bar * sp) * w_dn / dx**2


def terminal_eps_profile(grid, cv=CV_TERMINAL):
    """Ramped grid-scaled viscosity for the limit solve: zero at the entry
    (no second entry condition needed), cv*dx^2 elsewhere."""
    x = grid.nodes
    dx = grid.dx
    return cv * dx * dx * smooth_ramp((x - x[2]) / (10.0 * dx))


def assemble(cs, eps, cd=CD_DISSIPATION, k_floor_rel=K_FLOOR_REL,
             sponge=SPONGE_STRENGTH, cv=CV_TERMINAL, terminal=False,
             dealias=True):
    """Build the sparse collocation system for one viscosity value.

    eps > 0: constant viscosity, boundary rows u(-1) = d1u(-1) = 0 and
    d1u(exit) = 0 (2*n2 entry rows + n2 exit rows). eps == 0: the reduced
    second-order problem, boundary rows u(-1) = 0 and d1u(exit) = 0 only.
    terminal=True: eps == 0 boundary structure with the ramped grid-scaled
    viscosity term.
    """
    grid = cs.grid
    n1t = grid.n_total
    n2 = cs.n2
    dx = grid.dx
    N = n1t * n2

    hk = dealias_coefficient(cs.hk.values) if dealias else cs.hk.values
    hb = dealias_coefficient(cs.hb.values) if dealias else cs.hb.values
    ha = cs.h_alpha
    a = cs.a
    D2m = d2_matrix(n2, 1)
    D22m = d2_matrix(n2, 2)
    b_active = bool(np.any(hb != 0.0))

    sigma = dissipation_profile(cs, cd=cd, k_floor_rel=k_floor_rel, sponge=sponge)
    if terminal:
        eps_arr = terminal_eps_profile(grid, cv=cv)
        three_bc = False
    else:
        eps_arr = np.full(n1t, float(eps))
        three_bc = eps > 0.0

    i_first = 2 if three_bc else 1
    interior = np.arange(i_first, n1t - 1)
    jall = np.arange(n2)

    rows, cols, vals = [], [], []

    def add_diag_x2(i_rows, offset, coeff):
        """coeff * u[i+offset, j]; coeff per-(i,j) array or per-i vector."""
        ii = np.repeat(i_rows, n2)
        jj = np.tile(jall, len(i_rows))
        rows.append(ii * n2 + jj)
        cols.append((ii + offset) * n2 + jj)
        c = np.asarray(coeff)
        vals.append(np.repeat(c, n2) if c.ndim == 1 else c.ravel())

    def add_dense_x2(i_rows, offset, coeff, M):
        """coeff[i, j] * sum_jp M[j, jp] u[i+offset, jp]."""
        nzj, nzjp = np.nonzero(M)
        w = M[nzj, nzjp]
        ni, nz = len(i_rows), len(nzj)
        ii = np.repeat(i_rows, nz)
        rows.append(ii * n2 + np.tile(nzj, ni))
        cols.append((ii + offset) * n2 + np.tile(nzjp, ni))
        c = np.asarray(coeff)
        cmat = np.repeat(c, nz).reshape(ni, nz) if c.ndim == 1 else c[:, nzj]
        vals.append((cmat * w[None, :]).ravel())

    # hk * d11
    for off, w in STENCIL_D11:
        add_diag_x2(interior, off, hk[interior] * (w / dx**2))
    # -h alpha * d1
    for off, w in STENCIL_D1:
        add_diag_x2(interior, off, -ha[interior] * (w / dx))
    # a * d22 (dense in x2)
    add_dense_x2(interior, 0, a[interior], D22m)
    # hb * d12
    if b_active:
        for off, w in STENCIL_D1:
            add_dense_x2(interior, off, hb[interior] * (w / dx), D2m)
    # viscosity eps(x) * d111, compact backward-biased
    eps_rows = interior[(eps_arr[interior] > 0.0) & (interior >= 2)]
    if len(eps_rows):
        # h-weighted so the multiplier acts as a pure row scaling
        for off, w in STENCIL_D111:
            add_diag_x2(eps_rows, off,
                        cs.h[eps_rows] * eps_arr[eps_rows] * (w / dx**3))
    # fourth-difference dissipation (central window only)
    dis_rows = interior[(interior >= 2) & (interior <= n1t - 3)
                        & (sigma[interior] > 0.0)]
    if len(dis_rows):
        for off, w in STENCIL_D4RAW:
            add_diag_x2(dis_rows, off, -sigma[dis_rows] * w)

    # boundary rows
    rows.append(jall)
    cols.append(jall)
    vals.append(np.ones(n2))
    n_brows = n2
    if three_bc:
        for off, w in ENTRY_NEUMANN:
            rows.append(n2 + jall)
            cols.append(off * n2 + jall)
            vals.append(np.full(n2, w / (2.0 * dx)))
        n_brows += n2
    last = n1t - 1
    for off, w in EXIT_NEUMANN:
        rows.append(last * n2 + jall)
        cols.append((last + off) * n2 + jall)
        vals.append(np.full(n2, w / (2.0 * dx)))
    n_brows += n2

    A = sps.csc_matrix(
        (np.concatenate(vals),
         (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N),
    )
    rhs = np.zeros(N)
    idx = np.repeat(interior, n2) * n2 + np.tile(jall, len(interior))
    rhs[idx] = cs.rhs.values[interior].ravel()

    # row equilibration: keeps the direct solve backward-stable at the
    # residual gate despite the 1/dx^3-scale viscosity rows
    absA = A.copy()
    absA.data = np.abs(absA.data)
    row_scale = np.asarray(absA.max(axis=1).todense()).ravel()
    row_scale[row_scale == 0.0] = 1.0
    D = sps.diags(1.0 / row_scale)
    A = (D @ A).tocsc()
    rhs = rhs / row_scale

    return LinearSystem(matrix=A, rhs=rhs, grid=grid, n2=n2, eps=float(eps),
                        terminal=terminal, n_boundary_rows=n_brows)


def solve_linear(system, linear_tol=LINEAR_TOL):
    """Direct sparse solve; checks the relative residual and returns a
    Field2D on the extended grid plus the absolute residual norm."""
    A, b = system.matrix, system.rhs
    try:
        lu = spla.splu(A)
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse factorization failed: {exc}") from exc
    bnorm = float(np.linalg.norm(b))
    rnorm = float(np.linalg.norm(A @ x - b))
    # iterative refinement: a single LU pass can leave ~1e-9 relative
    # residual on the stiffer viscosity members
    for _ in range(3):
        if bnorm == 0.0 or rnorm / bnorm <= 0.1 * linear_tol:
            break
        x = x + lu.solve(b - A @ x)
        rnorm = float(np.linalg.norm(A @ x - b))
    if bnorm > 0.0:
        if rnorm / bnorm > linear_tol:
            raise SingularSystemError(
                f"relative residual {rnorm/bnorm:.3e} exceeds {linear_tol:.1e}"
            )
    elif float(np.linalg.norm(x)) > linear_tol:
        raise SingularSystemError("homogeneous system returned a nonzero solution")
    vals = x.reshape(system.grid.n_total, system.n2)
    return Field2D(x1=system.grid.nodes, values=vals), rnorm


def energy_report(cs, eps, u_ext, rnorm):
    """Discrete form of the viscous energy estimate on the extended domain:
    eps ||d11 u||_0^2 + ||u||_1^2 <= ratio * ||f||_0^2."""
    D11 = d1_matrix(len(u_ext.x1), u_ext.dx, 2)
    d11 = Field2D(x1=u_ext.x1, values=D11 @ u_ext.values)
    f2 = l2_norm(cs.rhs) ** 2
    lhs = eps * l2_norm(d11) ** 2 + sobolev_norm(u_ext, 1) ** 2
    ratio = lhs / f2 if f2 > 0 else 0.0
    return EnergyReport(eps=eps, lhs=lhs, rhs_norm=f2, ratio=ratio,
                        residual_norm=rnorm)


def solve_with_continuation(cs, eps_schedule=DEFAULT_EPS_SCHEDULE,
                            cv=CV_TERMINAL, linear_tol=LINEAR_TOL,
                            check_cauchy=True):
    """Solve down the viscosity schedule, verify the eps-differences shrink,
    then extract the limit with the grid-scaled terminal solve.

    Returns (u on M, EnergyReport at the last positive eps, diffs) where
    diffs[j] = ||u_{eps_j} - u_{eps_{j+1}}||_1 on M (the last entry compares
    the final schedule member against the terminal solve).
    """
    eps_schedule = tuple(eps_schedule)
    if any(e <= 0 for e in eps_schedule) or list(eps_schedule) != sorted(
            eps_schedule, reverse=True):
        raise ValueError("eps_schedule must be positive and decreasing")
    n1 = cs.grid.n1
    prev = None
    diffs = []
    report = None
    for eps in eps_schedule:
        system = assemble(cs, eps)
        u_ext, rnorm = solve_linear(system, linear_tol)
        u_m = restrict_to_m(u_ext, n1)
        if prev is not None:
            diff = Field2D(x1=u_m.x1, values=u_m.values - prev.values)
            diffs.append(sobolev_norm(diff, 1))
        prev = u_m
        report = energy_report(cs, eps, u_ext, rnorm)
    if check_cauchy and len(diffs) >= 2 and diffs[-1] > diffs[-2] \
            and diffs[-1] > 1e-14:
        raise ContinuationDivergence(
            f"eps-continuation differences grew: {diffs}"
        )
    system = assemble(cs, 0.0, cv=cv, terminal=True)
    u_ext, rnorm = solve_linear(system, linear_tol)
    u_m = restrict_to_m(u_ext, n1)
    if prev is not None:
        diff = Field2D(x1=u_m.x1, values=u_m.values - prev.values)
        diffs.append(sobolev_norm(diff, 1))
    return u_m, report, diffs


def solve_terminal(cs, cv=CV_TERMINAL, linear_tol=LINEAR_TOL):
    """Single limit solve (the Picard loop's fast path)."""
    system = assemble(cs, 0.0, cv=cv, terminal=True)
    u_ext, rnorm = solve_linear(system, linear_tol)
    return restrict_to_m(u_ext, cs.grid.n1), rnorm


# ---------------------------------------------------------------------------
# standalone 1D oracle (mode 0): same x1 stencil tables, banded system
# ---------------------------------------------------------------------------

def solve_mode0_1d(cs, eps, cv=CV_TERMINAL, terminal=False):
    """Third-order two-point BVP solve of the x2-averaged problem with the
    identical x1 stencils; oracle for the 2D solver's mode-0 reduction."""
    grid = cs.grid
    n1t = grid.n_total
    dx = grid.dx
    hk0 = cs.hk.values.mean(axis=1)
    ha0 = cs.h_alpha
    rhs0 = cs.rhs.values.mean(axis=1)
    sigma = dissipation_profile(cs)

    if terminal:
        eps_arr = terminal_eps_profile(grid, cv=cv)
        three_bc = False
    else:
        eps_arr = np.full(n1t, float(eps))
        three_bc = eps > 0.0
    i_first = 2 if three_bc else 1

    rows, cols, vals = [], [], []
    b = np.zeros(n1t)

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    add(0, 0, 1.0)
    if three_bc:
        for off, w in ENTRY_NEUMANN:
            add(1, off, w / (2.0 * dx))
    for off, w in EXIT_NEUMANN:
        add(n1t - 1, n1t - 1 + off, w / (2.0 * dx))
    for i in range(i_first, n1t - 1):
        for off, w in STENCIL_D11:
            add(i, i + off, hk0[i] * w / dx**2)
        for off, w in STENCIL_D1:
            add(i, i + off, -ha0[i] * w / dx)
        if eps_arr[i] > 0.0 and i >= 2:
            for off, w in STENCIL_D111:
                add(i, i + off, cs.h[i] * eps_arr[i] * w / dx**3)
        if 2 <= i <= n1t - 3 and sigma[i] > 0.0:
            for off, w in STENCIL_D4RAW:
                add(i, i + off, -sigma[i] * w)
        b[i] = rhs0[i]
    A = sps.csc_matrix((vals, (rows, cols)), shape=(n1t, n1t))
    x = spla.spsolve(A, b)
    return x
