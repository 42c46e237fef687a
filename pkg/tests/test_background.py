import dataclasses

import numpy as np
import pytest

from nozzleflow.background import (
    background_identities, mach_from_area_ratio, solve_background,
)
from nozzleflow.errors import AdmissibilityError, IdentityViolation
from nozzleflow.fields import make_grid
from nozzleflow.gas import Nozzle, default_gas, default_nozzle


class TestSolveBackground:
    def test_sonic_throat(self, bg257):
        i0 = (len(bg257.x1) - 1) // 2
        assert bg257.tau[i0] == 1.0
        assert bg257.k_b[i0] == 0.0

    def test_entry_exit_mach_vs_area_oracle(self, gas, bg257):
        m_in = mach_from_area_ratio(gas.gamma, 1.1, supersonic=False)
        m_out = mach_from_area_ratio(gas.gamma, 1.1, supersonic=True)
        assert abs(bg257.mach[0] - m_in) <= 1e-8
        assert abs(bg257.mach[-1] - m_out) <= 1e-8
        # frozen values from the oracle
        assert m_in == pytest.approx(0.69240, abs=1e-3)
        assert m_out == pytest.approx(1.37192, abs=1e-3)

    def test_entry_k_value(self, bg257):
        # k_b(-1) = n(-1)^2 (1 - tau(-1)) with tau from the area-Mach oracle
        tau_in = mach_from_area_ratio(1.4, 1.1, supersonic=False) ** 2
        expected = 1.1**2 * (1.0 - tau_in)
        assert bg257.k_b[0] == pytest.approx(expected, abs=1e-8)
        assert bg257.k_b[0] == pytest.approx(0.6299, abs=1e-2)

    def test_mass_flux_residual(self, nozzle, bg257):
        mf = bg257.rho_b * bg257.u_b * nozzle.radius(bg257.x1)
        assert np.max(np.abs(mf - bg257.flux)) / bg257.flux <= 1e-10

    def test_tau_monotone(self, bg257):
        assert np.all(np.diff(bg257.tau) > 0)

    def test_positivity_invariants(self, bg257):
        assert np.all(bg257.u_b > 0)
        assert np.all(bg257.d11_phi_b > 0)
        assert np.all(bg257.d1k_b < 0)
        assert np.all(bg257.alpha > 0)

    def test_potential_starts_at_zero_and_increases(self, bg257):
        assert bg257.phi_b[0] == 0.0
        assert np.all(np.diff(bg257.phi_b) > 0)

    def test_throat_lhospital_value(self, gas, nozzle, bg257):
        i0 = (len(bg257.x1) - 1) // 2
        expected = gas.critical_speed * np.sqrt(
            nozzle.radius(0.0) * nozzle.dd_radius(0.0) / (gas.gamma + 1.0)
        ) / nozzle.radius(0.0)
        assert bg257.d11_phi_b[i0] == pytest.approx(float(expected), rel=1e-12)

    def test_admissibility_guard(self, gas):
        # a_quad large enough pushes exit tau past 4/(3-gamma)
        with pytest.raises(AdmissibilityError):
            solve_background(gas, Nozzle(n0=1.0, a_quad=0.45), make_grid(129, 1.0))

    def test_equation_residual_order(self, gas, nozzle):
        # central-difference residual of the background ODE drops at order 2
        # (throat-adjacent nodes excluded: the equation degenerates there)
        res = {}
        for n1 in (129, 257):
            bg = solve_background(gas, nozzle, make_grid(n1, 1.0))
            dx = bg.x1[1] - bg.x1[0]
            d11 = (bg.u_b[2:] - bg.u_b[:-2]) / (2 * dx)
            n = nozzle.radius(bg.x1[1:-1])
            npr = nozzle.d_radius(bg.x1[1:-1])
            r = n * (bg.c_b_sq[1:-1] - bg.u_b[1:-1] ** 2) * d11 \
                + npr * bg.c_b_sq[1:-1] * bg.u_b[1:-1]
            i0 = (n1 - 1) // 2 - 1  # index into the interior slice
            keep = np.abs(np.arange(len(r)) - i0) > 1
            res[n1] = np.max(np.abs(r[keep]))
        order = np.log2(res[129] / res[257])
        assert 1.6 <= order <= 2.4


class TestIdentities:
    def test_report_on_default(self, nozzle, bg257):
        rep = background_identities(bg257, nozzle)
        assert rep.delta2 > 0
        assert rep.delta1 > 0
        assert rep.mass_flux_residual <= 1e-10

    def test_fd_matches_closed_form_order_two(self, gas, nozzle):
        mismatches = {}
        for n1 in (129, 257, 513):
            bg = solve_background(gas, nozzle, make_grid(n1, 1.0))
            mismatches[n1] = background_identities(bg, nozzle).fd_vs_closed_form
        o1 = np.log2(mismatches[129] / mismatches[257])
        o2 = np.log2(mismatches[257] / mismatches[513])
        assert 1.6 <= o1 <= 2.4
        assert 1.6 <= o2 <= 2.4

    def test_mirrored_subsonic_input_violates(self, bg257):
        # fake all-subsonic flow: mirror the subsonic half onto x1 > 0
        n1 = len(bg257.x1)
        i0 = (n1 - 1) // 2

        def mirror(arr):
            out = arr.copy()
            out[i0 + 1:] = arr[:i0][::-1]
            return out

        fake = dataclasses.replace(
            bg257,
            u_b=mirror(bg257.u_b), rho_b=mirror(bg257.rho_b),
            c_b_sq=mirror(bg257.c_b_sq), tau=mirror(bg257.tau),
            k_b=mirror(bg257.k_b), alpha=mirror(bg257.alpha),
            d1k_b=mirror(bg257.d1k_b), d11_phi_b=mirror(bg257.d11_phi_b),
        )
        with pytest.raises(IdentityViolation):
            background_identities(fake)

    def test_alpha_sign_flip_detected(self, bg257):
        fake = dataclasses.replace(bg257, alpha=-bg257.alpha)
        with pytest.raises(IdentityViolation):
            background_identities(fake)
