import numpy as np
import pytest

from nozzleflow.config import parse_config_text
from nozzleflow.errors import KappaExceeded
from nozzleflow.fields import (
    d2_spectral, derivative, make_grid, series_from_modes, sobolev_norm,
    circle_norm,
)
from nozzleflow.iteration import (
    TransonicProblem, diagnostics, lift_boundary, solve_transonic,
)
from nozzleflow.runs import make_problem


def small_problem(g_modes, n1=65, n2=16, **overrides):
    lines = [f"solver.n1 = {n1}", f"solver.n2 = {n2}"]
    for m, amp in g_modes.items():
        lines.append(f"g.mode.{m} = {amp!r}")
    for k, v in overrides.items():
        lines.append(f"{k} = {v}")
    return make_problem(parse_config_text("\n".join(lines)))


class TestLift:
    def test_zero(self):
        grid = make_grid(65, 1.0)
        g = series_from_modes({}, 16)
        lift = lift_boundary(g, grid, 16)
        assert np.all(lift.values == 0.0)

    def test_trace_matches_spectrally(self):
        grid = make_grid(65, 1.0)
        g = series_from_modes({1: 1e-3, 3: 2e-4}, 16)
        lift = lift_boundary(g, grid, 16)
        x2 = lift.x2
        expected = 1e-3 * np.cos(x2) + 2e-4 * np.cos(3 * x2)
        assert np.max(np.abs(lift.values[0] - expected)) <= 1e-14
        assert np.max(np.abs(lift.values - lift.values[0][None, :])) == 0.0
        assert sobolev_norm(lift, 4) > 0

    def test_constant(self):
        grid = make_grid(65, 1.0)
        g = series_from_modes({0: 2.5e-3}, 16)
        lift = lift_boundary(g, grid, 16)
        assert np.allclose(lift.values, 2.5e-3)


class TestFixedPoints:
    def test_zero_perturbation_converges_immediately(self):
        prob = small_problem({})
        sol, rep = solve_transonic(prob)
        assert rep.iterations == 1
        assert np.max(np.abs(sol.phi_hat.values)) <= 1e-12
        assert sol.stability_ratio == 0.0
        assert np.max(np.abs(sol.sonic_line)) <= 1e-12

    def test_constant_perturbation_is_fixed_point(self):
        c = 1e-3
        prob = small_problem({0: c})
        sol, rep = solve_transonic(prob)
        assert rep.iterations == 1
        assert np.max(np.abs(sol.phi_hat.values - c)) <= 1e-9

    def test_converged_iterate_is_stationary(self, sweep_solutions):
        sol, rep = sweep_solutions[1e-3]
        # one more application of the map changes the iterate below tol
        from nozzleflow.iteration import IterationState, picard_step
        prob = make_problem(parse_config_text(
            "solver.n1 = 257\nsolver.n2 = 32\ng.mode.1 = 0.001"))
        state = IterationState(phi_hat=sol.phi_hat, kappa_measured=0.0)
        new = picard_step(state, prob)
        assert new.step_norms[-1] <= 10 * prob.tol * max(1.0, sol.g_norm5)


class TestContractionAndStability:
    def test_contraction_ratios_below_one(self, sweep_solutions):
        for eps, (sol, rep) in sweep_solutions.items():
            assert all(r < 1.0 for r in rep.contraction_ratios), eps

    def test_kappa_contained(self, sweep_solutions):
        for eps, (sol, rep) in sweep_solutions.items():
            assert sol.phi_hat_norm4 <= 0.2

    def test_stability_ratio_constant_across_sweep(self, sweep_solutions):
        ratios = [sweep_solutions[e][0].stability_ratio
                  for e in sorted(sweep_solutions)]
        for a in ratios:
            for b in ratios:
                assert abs(a - b) <= 0.15 * min(a, b)

    def test_mode_content_linear_and_quadratic(self, sweep_solutions):
        # first-order response is pure mode 1; other modes are second order
        eps_list = sorted(sweep_solutions, reverse=True)
        amp1, amp2 = [], []
        for eps in eps_list:
            sol, _ = sweep_solutions[eps]
            spec = np.abs(np.fft.fft(sol.phi_hat.values, axis=1))
            amp1.append(np.max(spec[:, 1]))
            amp2.append(np.max(spec[:, 2]))
        s1 = np.polyfit(np.log(eps_list), np.log(amp1), 1)[0]
        s2 = np.polyfit(np.log(eps_list), np.log(amp2), 1)[0]
        assert abs(s1 - 1.0) <= 0.1
        assert abs(s2 - 2.0) <= 0.4

    def test_g_too_large_rejected(self):
        with pytest.raises(KappaExceeded):
            small_problem({1: 0.5})

    def test_kappa_guard_fires(self):
        prob = small_problem({1: 1e-3}, **{"iter.kappa0": "1e-9"})
        with pytest.raises(KappaExceeded):
            solve_transonic(prob)


class TestDiagnostics:
    def test_background_mass_residual_order(self, gas, nozzle, bg_by_n1):
        # mass residual of the pure background potential drops at order 2
        from nozzleflow.iteration import mass_residual
        from nozzleflow.fields import Field2D
        res = {}
        for n1 in (129, 257):
            prob = small_problem({}, n1=n1, n2=16)
            bg = bg_by_n1(n1)
            zero = Field2D(x1=bg.x1, values=np.zeros((n1, 16)))
            res[n1] = mass_residual(prob, bg, zero)
        order = np.log2(res[129] / res[257])
        assert 1.6 <= order <= 2.4, res

    def test_sonic_line_at_throat_for_background(self, bg_by_n1):
        from nozzleflow.iteration import mass_residual, _sonic_line
        bg = bg_by_n1(129)
        signal = (bg.c_b_sq - bg.u_b**2)[:, None] * np.ones((1, 8))
        xs, counts = _sonic_line(bg.x1, signal)
        assert np.allclose(xs, 0.0)
        assert np.all(counts == 1)

    def test_sonic_displacement_linear_in_eps(self, sweep_solutions):
        eps_list = sorted(sweep_solutions, reverse=True)
        disp = [float(np.nanmax(np.abs(sweep_solutions[e][0].sonic_line)))
                for e in eps_list]
        slope = np.polyfit(np.log(eps_list), np.log(disp), 1)[0]
        assert abs(slope - 1.0) <= 0.15

    def test_entry_tangential_velocity(self, sweep_solutions):
        prob = make_problem(parse_config_text(
            "solver.n1 = 257\nsolver.n2 = 32\ng.mode.1 = 0.001"))
        from nozzleflow.background import solve_background
        bg = solve_background(prob.gas, prob.nozzle, prob.grid)
        sol, _ = sweep_solutions[1e-3]
        diag = diagnostics(prob, bg, sol)
        x2 = sol.phi_hat.x2
        expected = -1e-3 * np.sin(x2) / prob.nozzle.radius(-1.0)
        assert np.max(np.abs(diag.entry_tangential - expected)) <= 1e-12

    def test_type_transition(self, sweep_solutions):
        for eps, (sol, rep) in sweep_solutions.items():
            assert np.all(sol.k_sign_changes == 1), eps

    def test_equation_residual_small(self, sweep_solutions):
        dx = 2.0 / 256
        tol = max(1e-7, 5 * dx * dx)
        for eps, (sol, rep) in sweep_solutions.items():
            assert sol.equation_residual <= tol, eps
