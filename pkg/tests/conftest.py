"""Shared fixtures. Heavy solves are session-scoped and reused by the unit
tests and the acceptance suite."""

import numpy as np
import pytest

from nozzleflow.background import solve_background
from nozzleflow.coefficients import CoefficientSet
from nozzleflow.config import parse_config_text
from nozzleflow.fields import Field2D, make_grid
from nozzleflow.gas import default_gas, default_nozzle
from nozzleflow.iteration import solve_transonic
from nozzleflow.runs import make_problem

SWEEP_EPS = (1e-3, 3e-4, 1e-4)


@pytest.fixture(scope="session")
def gas():
    return default_gas()


@pytest.fixture(scope="session")
def nozzle():
    return default_nozzle()


@pytest.fixture(scope="session")
def grid257():
    return make_grid(257, 1.0)


@pytest.fixture(scope="session")
def bg257(gas, nozzle, grid257):
    return solve_background(gas, nozzle, grid257)


@pytest.fixture(scope="session")
def bg_by_n1(gas, nozzle):
    cache = {}

    def get(n1):
        if n1 not in cache:
            cache[n1] = solve_background(gas, nozzle, make_grid(n1, 1.0))
        return cache[n1]

    return get


def _solve_for(amplitude, n1=257, n2=32):
    cfg = parse_config_text(
        f"solver.n1 = {n1}\nsolver.n2 = {n2}\ng.mode.1 = {amplitude!r}\n"
    )
    return solve_transonic(make_problem(cfg))


@pytest.fixture(scope="session")
def sweep_solutions():
    """(sol, report) per amplitude of g = eps cos(x2) on the default grid."""
    return {eps: _solve_for(eps) for eps in SWEEP_EPS}


@pytest.fixture(scope="session")
def solve_129():
    """g = 1e-3 cos(x2) on the half-resolution grid (refinement studies)."""
    return _solve_for(1e-3, n1=129)


def constant_coefficient_set(grid, n2, k=1.0, b=0.0, alpha=0.0, h_value=1.0,
                             rhs=None, mu=0.0):
    """CoefficientSet with constant coefficients on the extended grid
    (manufactured-solution and linearity tests)."""
    n_tot = grid.n_total
    x = grid.nodes
    h = np.full(n_tot, h_value) if np.isscalar(h_value) else np.asarray(h_value)
    ones = np.ones((n_tot, n2))
    rhs_vals = np.zeros((n_tot, n2)) if rhs is None else np.asarray(rhs)
    return CoefficientSet(
        grid=grid, n2=n2, h=h,
        hk=Field2D(x1=x, values=h[:, None] * k * ones),
        hb=Field2D(x1=x, values=h[:, None] * b * ones),
        h_alpha=h * alpha,
        a=h.copy(),
        rhs=Field2D(x1=x, values=h[:, None] * rhs_vals),
        mu=mu, k_exit=k,
    )


def manufactured_fields(grid, n2):
    """u* = sin(pi (x1+1)/2) cos(x2) on the extended domain [-1, 2]:
    vanishes at the entry and has zero x1-slope at x1 = 2."""
    x = grid.nodes
    x2 = 2.0 * np.pi * np.arange(n2) / n2
    u = np.sin(np.pi * (x[:, None] + 1.0) / 2.0) * np.cos(x2)[None, :]
    lap = -(np.pi**2 / 4.0 + 1.0) * u
    return u, lap


@pytest.fixture(scope="session")
def background_cs_factory(gas, nozzle, bg_by_n1):
    """Background-frozen CoefficientSet with rhs = h * 1 at a given n1."""
    from nozzleflow.coefficients import (
        build_multiplier_and_extend, pointwise_coefficients, zero_gradient,
    )

    cache = {}

    def get(n1, n2=32):
        key = (n1, n2)
        if key not in cache:
            grid = make_grid(n1, 1.0)
            bg = bg_by_n1(n1)
            grad = zero_gradient(grid, n2)
            k_f, b_f = pointwise_coefficients(gas, nozzle, bg, grad)
            source = Field2D(x1=grid.x_m, values=np.ones((grid.n1, n2)))
            cache[key] = build_multiplier_and_extend(
                gas, nozzle, bg, grid, k_f, b_f, source)
        return cache[key]

    return get
