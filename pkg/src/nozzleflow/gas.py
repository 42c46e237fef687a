"""Polytropic gas model and the quadratic nozzle profile.

The gas satisfies p = kappa * rho**gamma with sound speed
c**2 = kappa*gamma*rho**(gamma-1), and energy conservation along the flow

    q**2 / 2 + c**2 / (gamma - 1) = c0,

so the Bernoulli inversion is closed form: given the speed squared q**2,

    c**2 = (gamma - 1) * (c0 - q**2 / 2),
    rho  = (c**2 / (kappa*gamma)) ** (1 / (gamma - 1)).

The nozzle radius is n(t) = n0 + a_quad * t**2: convergent on (-1, 0),
divergent on (0, 1), throat at t = 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CavitationError, RangeError


@dataclass(frozen=True)
class GasModel:
    gamma: float
    kappa_gas: float
    c0: float

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise RangeError(f"gamma must be > 1, got {self.gamma}")
        if not self.kappa_gas > 0.0:
            raise RangeError(f"kappa_gas must be > 0, got {self.kappa_gas}")
        if not self.c0 > 0.0:
            raise RangeError(f"c0 must be > 0, got {self.c0}")

    @property
    def critical_speed_sq(self):
        """c*^2, the speed^2 at which q = c (sonic state)."""
        return 2.0 * (self.gamma - 1.0) * self.c0 / (self.gamma + 1.0)

    @property
    def critical_speed(self):
        return float(np.sqrt(self.critical_speed_sq))

    @property
    def rho_star(self):
        """Density at the sonic state."""
        return float(
            (self.critical_speed_sq / (self.kappa_gas * self.gamma))
            ** (1.0 / (self.gamma - 1.0))
        )

    @property
    def q_max_sq(self):
        """Cavitation limit: q^2 at which density vanishes."""
        return 2.0 * self.c0


def default_gas(gamma=1.4, kappa_gas=1.0, c0=None):
    """Default air-like gas. When c0 is omitted it is derived from the
    normalization rho* = 1 at the sonic state, which gives
    c0 = kappa*gamma*(gamma+1) / (2*(gamma-1))."""
    if c0 is None:
        c0 = kappa_gas * gamma * (gamma + 1.0) / (2.0 * (gamma - 1.0))
    return GasModel(gamma=gamma, kappa_gas=kappa_gas, c0=c0)


@dataclass(frozen=True)
class Nozzle:
    n0: float
    a_quad: float

    def __post_init__(self):
        if not self.n0 > 0.0:
            raise RangeError(f"n0 must be > 0, got {self.n0}")
        if not self.a_quad > 0.0:
            raise RangeError(f"a_quad must be > 0, got {self.a_quad}")

    def radius(self, t):
        return self.n0 + self.a_quad * np.asarray(t, dtype=float) ** 2

    def d_radius(self, t):
        return 2.0 * self.a_quad * np.asarray(t, dtype=float)

    def dd_radius(self, t):
        t = np.asarray(t, dtype=float)
        return np.full_like(t, 2.0 * self.a_quad)


def default_nozzle(n0=1.0, a_quad=0.1):
    return Nozzle(n0=n0, a_quad=a_quad)


def nozzle_eval(nozzle, t):
    """Evaluate (n, n', n'') at t. Exact polynomial arithmetic."""
    return nozzle.radius(t), nozzle.d_radius(t), nozzle.dd_radius(t)


def sound_speed_sq(gas, q_sq):
    """c^2 as a function of speed^2, from energy conservation."""
    return (gas.gamma - 1.0) * (gas.c0 - np.asarray(q_sq, dtype=float) / 2.0)


def bernoulli_state(gas, q_sq):
    """Invert the energy relation: (rho, c^2) for a given speed^2.

    Accepts scalars or arrays. Raises CavitationError when any q^2 >= 2*c0.
    """
    q_sq = np.asarray(q_sq, dtype=float)
    if np.any(q_sq >= gas.q_max_sq) or np.any(q_sq < 0.0):
        bad = float(np.max(q_sq))
        raise CavitationError(
            f"q^2 = {bad} outside physical range [0, {gas.q_max_sq})"
        )
    c_sq = sound_speed_sq(gas, q_sq)
    rho = (c_sq / (gas.kappa_gas * gas.gamma)) ** (1.0 / (gas.gamma - 1.0))
    if q_sq.ndim == 0:
        return float(rho), float(c_sq)
    return rho, c_sq


def mass_flux(gas, u):
    """rho(u^2) * u for purely axial speed u; unimodal with max at u = c*."""
    rho, _ = bernoulli_state(gas, np.asarray(u, dtype=float) ** 2)
    return rho * np.asarray(u, dtype=float)


def d_mass_flux(gas, u):
    """d(rho u)/du = rho * (1 - u^2/c^2); vanishes exactly at the sonic speed."""
    u = np.asarray(u, dtype=float)
    rho, c_sq = bernoulli_state(gas, u**2)
    return rho * (1.0 - u**2 / c_sq)
