"""Choked quasi-1D transonic background flow.

The x2-independent potential phi_b satisfies

    n (c_b^2 - u_b^2) u_b' + n' c_b^2 u_b = 0,   u_b = d1 phi_b,

whose first integral is constant mass flux rho_b * u_b * n = rho* c* n(0)
(choked: sonic exactly at the throat). Each node is solved for u_b on the
subsonic branch (x1 < 0) or supersonic branch (x1 > 0) of the unimodal flux
function rho(u) u; the throat gets the exact sonic state.

Derived fields:
    tau    = u_b^2 / c_b^2                      (Mach squared)
    k_b    = n^2 (1 - tau)
    d1k_b  = -n n' [(gamma+1) tau^2 - 2 tau + 2] / (tau - 1)
    alpha  =  n n' [1 + tau + (gamma-1) tau^2] / (tau - 1)
    d11phi = u_b n' / (n (tau - 1))

with n'/(tau-1) -> sqrt(n n'' / (gamma+1)) at the throat (L'Hospital).
"""

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, BranchSolveError, IdentityViolation
from .gas import bernoulli_state, d_mass_flux, mass_flux

_REL_TOL = 1e-14
_NEWTON_CAP = 100


@dataclass(frozen=True)
class BackgroundFlow:
    x1: np.ndarray
    u_b: np.ndarray
    rho_b: np.ndarray
    c_b_sq: np.ndarray
    tau: np.ndarray
    phi_b: np.ndarray
    k_b: np.ndarray
    alpha: np.ndarray
    d1k_b: np.ndarray
    d11_phi_b: np.ndarray
    flux: float           # rho* c* n(0)

    @property
    def mach(self):
        return np.sqrt(self.tau)


def area_mach_sq(gamma, tau):
    """(A/A*)^2 as a function of tau = M^2 (isentropic area-Mach relation)."""
    e = (gamma + 1.0) / (gamma - 1.0)
    return (1.0 / tau) * ((2.0 / (gamma + 1.0)) * (1.0 + (gamma - 1.0) / 2.0 * tau)) ** e


def mach_from_area_ratio(gamma, area_ratio, supersonic, tol=1e-14):
    """Independent oracle: invert A/A* for M by pure bisection on tau.

    Derivable from energy conservation plus constant mass flux; used to
    cross-check the flux-equation solve.
    """
    if area_ratio < 1.0:
        raise ValueError("area ratio below 1 has no choked solution")
    target = area_ratio * area_ratio
    lo, hi = (1.0, 400.0) if supersonic else (1e-12, 1.0)
    f = lambda t: area_mach_sq(gamma, t) - target
    if f(lo) * f(hi) > 0:
        raise ValueError("bisection bracket does not contain a root")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < tol * max(1.0, hi):
            break
    return float(np.sqrt(0.5 * (lo + hi)))


def _solve_branch(gas, targets, subsonic):
    """Vectorized guarded Newton on u -> rho(u) u = target, bisection fallback.

    The flux function is unimodal with maximum at u = c*, so the branch
    brackets [eps, c*] and [c*, sqrt(2 c0) - eps] are guaranteed.
    """
    cstar = gas.critical_speed
    umax = float(np.sqrt(gas.q_max_sq))
    if subsonic:
        lo_b, hi_b = 1e-9 * cstar, cstar
        u = np.full_like(targets, 0.5 * cstar)
    else:
        lo_b, hi_b = cstar, umax * (1.0 - 1e-12)
        u = np.full_like(targets, 1.5 * cstar)
    u = np.clip(u, lo_b, hi_b)
    active = np.ones(u.shape, dtype=bool)
    for _ in range(_NEWTON_CAP):
        F = mass_flux(gas, u) - targets
        done = np.abs(F) <= _REL_TOL * targets
        active &= ~done
        if not active.any():
            break
        dF = d_mass_flux(gas, u)
        bad = active & (np.abs(dF) < 1e-300)
        step = np.zeros_like(u)
        ok = active & ~bad
        step[ok] = F[ok] / dF[ok]
        unew = u - step
        out = ok & ((unew < lo_b) | (unew > hi_b))
        u[ok] = unew[ok]
        active &= ~out  # leave out-of-bracket nodes to bisection
        u[out | bad] = np.clip(u[out | bad], lo_b, hi_b)
        if (out | bad).any():
            active[out | bad] = False
            _bisect_into(gas, targets, u, out | bad, lo_b, hi_b)
    F = mass_flux(gas, u) - targets
    miss = np.abs(F) > 1e-10 * targets
    if miss.any():
        _bisect_into(gas, targets, u, miss, lo_b, hi_b)
        F = mass_flux(gas, u) - targets
        if np.any(np.abs(F) > 1e-10 * targets):
            raise BranchSolveError(
                "mass-flux root not found on "
                + ("subsonic" if subsonic else "supersonic")
                + " branch (unphysical gas/nozzle combination?)"
            )
    return u


def _bisect_into(gas, targets, u, mask, lo_b, hi_b):
    """Bisection on the flux equation for the masked nodes, then one Newton
    polish. The flux is increasing on the subsonic branch and decreasing on
    the supersonic branch, both ending at the maximum at c*."""
    idx = np.where(mask)[0]
    if len(idx) == 0:
        return
    lo = np.full(len(idx), lo_b)
    hi = np.full(len(idx), hi_b)
    t = targets[idx]
    flo = mass_flux(gas, lo) - t
    for _ in range(110):
        mid = 0.5 * (lo + hi)
        fm = mass_flux(gas, mid) - t
        same = (flo <= 0) == (fm <= 0)
        lo = np.where(same, mid, lo)
        flo = np.where(same, fm, flo)
        hi = np.where(same, hi, mid)
    root = 0.5 * (lo + hi)
    for _ in range(3):
        dF = d_mass_flux(gas, root)
        safe = np.abs(dF) > 1e-300
        corr = np.where(safe, (mass_flux(gas, root) - t) / np.where(safe, dF, 1.0), 0.0)
        root = np.clip(root - corr, lo_b, hi_b)
    u[idx] = root


def solve_background(gas, nozzle, grid):
    """Choked background on the physical nodes of `grid`."""
    x = grid.x_m
    n = nozzle.radius(x)
    npr = nozzle.d_radius(x)
    nppr = nozzle.dd_radius(x)
    cstar = gas.critical_speed
    flux = gas.rho_star * cstar * float(nozzle.radius(0.0))

    u = np.empty_like(x)
    i0 = grid.i_throat
    sub = x < 0.0
    sup = x > 0.0
    u[sub] = _solve_branch(gas, flux / n[sub], subsonic=True)
    u[sup] = _solve_branch(gas, flux / n[sup], subsonic=False)
    u[i0] = cstar

    rho, c_sq = bernoulli_state(gas, u**2)
    c_sq[i0] = u[i0] ** 2  # the sonic state is exact, not up to round-off
    tau = u**2 / c_sq

    if np.max(tau) >= 4.0 / (3.0 - gas.gamma):
        raise AdmissibilityError(
            f"max tau = {np.max(tau):.6f} >= 4/(3-gamma) = "
            f"{4.0/(3.0-gas.gamma):.6f}: nozzle too strong for this gamma"
        )

    # n'/(tau-1) is smooth through the throat; L'Hospital value there
    ratio = np.empty_like(x)
    away = np.arange(len(x)) != i0
    ratio[away] = npr[away] / (tau[away] - 1.0)
    ratio[i0] = np.sqrt(n[i0] * nppr[i0] / (gas.gamma + 1.0))

    gamma = gas.gamma
    k_b = n**2 * (1.0 - tau)
    alpha = n * ratio * (1.0 + tau + (gamma - 1.0) * tau**2)
    d1k_b = -n * ratio * ((gamma + 1.0) * tau**2 - 2.0 * tau + 2.0)
    d11_phi_b = u * ratio / n

    # potential by composite trapezoid, phi_b(-1) = 0
    phi = np.concatenate(([0.0], np.cumsum(0.5 * (u[1:] + u[:-1]) * grid.dx)))

    return BackgroundFlow(
        x1=x, u_b=u, rho_b=rho, c_b_sq=c_sq, tau=tau, phi_b=phi,
        k_b=k_b, alpha=alpha, d1k_b=d1k_b, d11_phi_b=d11_phi_b, flux=flux,
    )


@dataclass(frozen=True)
class IdentityReport:
    fd_vs_closed_form: float   # max |central FD of k_b - d1k_b| (interior)
    delta1: float              # min over l=0..6 of (2 alpha - l d1k_b)
    delta2: float              # min of (2 alpha + d1k_b)
    mass_flux_residual: float  # max relative |rho u n - flux|


def background_identities(bg, nozzle=None):
    """Check the background sign conditions and closed-form derivatives.

    Raises IdentityViolation when a sign condition fails at any node.
    """
    x = bg.x1
    dx = float(x[1] - x[0])
    i0 = (len(x) - 1) // 2

    if not np.all(bg.tau[:i0] < 1.0) or not np.all(bg.tau[i0 + 1:] > 1.0) \
            or abs(bg.tau[i0] - 1.0) > 1e-12:
        raise IdentityViolation("tau does not cross 1 exactly at the throat")
    if not np.all(bg.u_b > 0.0) or not np.all(bg.d11_phi_b > 0.0):
        raise IdentityViolation("u_b or d11 phi_b not positive everywhere")
    if not np.all(bg.d1k_b < 0.0):
        raise IdentityViolation("d1 k_b not negative everywhere")
    if not np.all(bg.alpha > 0.0):
        raise IdentityViolation("alpha not positive everywhere")
    d2 = float(np.min(2.0 * bg.alpha + bg.d1k_b))
    if d2 <= 0.0:
        raise IdentityViolation("2 alpha + d1 k_b not positive everywhere")

    fd = (bg.k_b[2:] - bg.k_b[:-2]) / (2.0 * dx)
    mismatch = float(np.max(np.abs(fd - bg.d1k_b[1:-1])))

    d1 = min(
        float(np.min(2.0 * bg.alpha - l * bg.d1k_b)) for l in range(7)
    )

    if nozzle is not None:
        mf = bg.rho_b * bg.u_b * nozzle.radius(x)
        mass_res = float(np.max(np.abs(mf - bg.flux)) / bg.flux)
    else:
        mass_res = float("nan")

    return IdentityReport(
        fd_vs_closed_form=mismatch,
        delta1=d1,
        delta2=d2,
        mass_flux_residual=mass_res,
    )
