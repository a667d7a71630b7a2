import math

import numpy as np
import pytest

from cityroad.asymptotic import (
    AsymptoticState,
    asymptotic_dispersion_eval,
    compute_c_star_inf,
    large_d_convergence_experiment,
    simulate_asymptotic,
    step_asymptotic,
)
from cityroad.front_speed import estimate_speed, inner_deficit, outer_occupancy
from cityroad.lattice_sim import InitialData, SimulationConfig
from cityroad.model import Parameters, logistic


@pytest.fixture
def p():
    return Parameters(1.0, 1.0, 1.0, nonlinearity=logistic(1.0))


@pytest.fixture(scope="module")
def c_inf():
    return compute_c_star_inf(Parameters(1.0, 1.0, 1.0, nonlinearity=logistic(1.0)))


class TestDispersionEval:
    def test_psi_at_mu_zero(self, p):
        ev = asymptotic_dispersion_eval(0.0, 0.7, p)
        assert ev.psi == pytest.approx(-3.0 + math.sqrt(17.0), rel=1e-14)
        assert ev.psi > 0.0  # positive for every c at mu = 0

    def test_delta_at_zero(self, p):
        assert asymptotic_dispersion_eval(0.0, 0.0, p).delta_inf == pytest.approx(17.0)

    def test_delta_even_in_mu(self, p):
        for mu in (0.3, 1.1, 2.7):
            a = asymptotic_dispersion_eval(mu, 0.0, p).delta_inf
            # cosh is even; evaluate the formula with the sign flipped by hand
            b = (2 * p.alpha - 2 * p.beta + p.fprime0) ** 2 + 8 * p.alpha * p.beta * (
                1 + math.cosh(-mu)
            )
            assert a == pytest.approx(b, rel=1e-15)

    def test_c_plus_infinite_at_zero(self, p):
        assert asymptotic_dispersion_eval(0.0, 0.0, p).c_plus == math.inf

    def test_quadratic_root_identity(self, p):
        # (mu c)^2 + (2b - f0 + 2a)(mu c) + 2a(2b - f0) - 2ab(1 + cosh mu) = 0
        a, b, f0 = p.alpha, p.beta, p.fprime0
        for mu in (0.2, 0.9, 1.7, 3.0):
            c = asymptotic_dispersion_eval(mu, 0.0, p).c_plus
            x = mu * c
            res = x**2 + (2 * b - f0 + 2 * a) * x + 2 * a * (2 * b - f0) \
                - 2 * a * b * (1 + math.cosh(mu))
            assert abs(res) <= 1e-10 * max(1.0, x**2)


class TestCStarInf:
    def test_grid_vs_golden(self, p, c_inf):
        mus = np.geomspace(c_inf.mu_star * 0.9, c_inf.mu_star * 1.1, 2_000_001)
        cs = [asymptotic_dispersion_eval(float(m), 0.0, p).c_plus for m in
              (c_inf.mu_star * 0.999, c_inf.mu_star, c_inf.mu_star * 1.001)]
        # dense local grid oracle
        dense = np.array([asymptotic_dispersion_eval(float(m), 0.0, p).c_plus
                          for m in np.linspace(c_inf.mu_star * 0.99, c_inf.mu_star * 1.01, 20001)])
        assert c_inf.c_star_inf == pytest.approx(float(dense.min()), rel=1e-10)

    def test_endpoints_dwarf_minimum(self, p, c_inf):
        lo = asymptotic_dispersion_eval(1e-4, 0.0, p).c_plus
        hi = asymptotic_dispersion_eval(50.0, 0.0, p).c_plus
        assert lo > 10.0 * c_inf.c_star_inf
        assert hi > 10.0 * c_inf.c_star_inf

    def test_tangency(self, c_inf):
        assert c_inf.psi_residual <= 1e-10
        assert c_inf.dpsi_dmu_residual <= 1e-8

    def test_sign_structure(self, p, c_inf):
        mus = np.linspace(1e-3, 12.0, 4001)
        below = np.array([asymptotic_dispersion_eval(float(m), 0.9 * c_inf.c_star_inf, p).psi
                          for m in mus])
        assert np.all(below > 0.0)  # c < c*inf: Psi positive everywhere
        above = np.array([asymptotic_dispersion_eval(float(m), 1.1 * c_inf.c_star_inf, p).psi
                          for m in mus])
        signs = np.sign(above)
        changes = np.nonzero(np.diff(signs))[0]
        assert len(changes) == 2  # two roots mu1 < mu* < mu2
        mu1, mu2 = mus[changes[0]], mus[changes[1] + 1]
        assert mu1 < c_inf.mu_star < mu2

    def test_needs_reaction(self):
        with pytest.raises(ValueError):
            compute_c_star_inf(Parameters(1, 1, 1, nonlinearity=logistic(0.0)))


class TestStep:
    def test_constant_fixed_point_interior(self, p):
        n = 25
        s = AsymptoticState(-12, 12, np.ones(n - 1), np.ones(n), 0.0)
        s1 = step_asymptotic(s, 0.01, p)
        assert np.max(np.abs(s1.P[4:-4] - 1.0)) <= 1e-13
        assert np.max(np.abs(s1.V[4:-4] - 1.0)) <= 1e-13

    def test_zero_state(self, p):
        s = AsymptoticState(0, 8, np.zeros(8), np.zeros(9), 0.0)
        s1 = step_asymptotic(s, 0.01, p)
        assert np.all(s1.P == 0.0) and np.all(s1.V == 0.0)

    def test_ordering_preserved(self, p):
        cfg = SimulationConfig(T=5.0, dt=0.01, m=8, c_upper_guess=1.0, snapshot_stride=50)
        lo = simulate_asymptotic(InitialData.custom(np.full(9, 0.2), j_min=-4,
                                                    edge_mode="stationary"), cfg, p)
        hi = simulate_asymptotic(InitialData.custom(np.full(9, 0.5), j_min=-4,
                                                    edge_mode="stationary"), cfg, p)
        for a, b in zip(lo.snapshots, hi.snapshots):
            assert np.max(a.P - b.P) <= 1e-10
            assert np.max(a.V - b.V) <= 1e-10
            assert float(np.min(a.P)) >= -1e-12

    def test_stationary_relation_at_fixed_point(self, p):
        # V = beta/(2 alpha) (P_j + P_{j+1}) characterizes the steady state
        n = 15
        P = np.ones(n)
        V = p.beta / (2 * p.alpha) * (P[:-1] + P[1:])
        s = AsymptoticState(-7, 7, V, P, 0.0)
        s1 = step_asymptotic(s, 0.01, p)
        assert np.allclose(s1.V[3:-3], p.beta / (2 * p.alpha) * (s1.P[3:-4] + s1.P[4:-3]),
                           atol=1e-13)

    def test_dt_cap(self, p):
        s = AsymptoticState(0, 4, np.zeros(4), np.ones(5), 0.0)
        with pytest.raises(ValueError):
            step_asymptotic(s, 0.2, p)


class TestMassAnalogue:
    def test_reaction_free_conservation(self):
        # with f = 0 the leak-corrected sum V + P is an exact linear invariant
        # of the RK4 step, so drift stays at roundoff
        p0 = Parameters(1.0, 1.0, 1.0, nonlinearity=logistic(0.0))
        cfg = SimulationConfig(T=10.0, dt=0.01, m=8, c_upper_guess=1.0)
        traj = simulate_asymptotic(InitialData.left_block(), cfg, p0)
        drift = np.max(np.abs(traj.mass - traj.mass[0])) / abs(traj.mass[0])
        assert drift <= 1e-12


class TestSpreadingDichotomy:
    @pytest.mark.slow
    def test_desk_scale_dichotomy(self, p, c_inf):
        cfg = SimulationConfig(T=80.0, dt=0.01, m=8, c_upper_guess=1.5 * c_inf.c_star_inf)
        traj = simulate_asymptotic(InitialData.sine_bump(3, 0.5), cfg, p)
        assert outer_occupancy(traj, c_inf.c_star_inf, factor=1.2) < 1e-3
        assert inner_deficit(traj, p, c_inf.c_star_inf, factor=0.8) <= 0.05


class TestLargeD:
    def test_matched_steady_states_agree(self, p):
        rho = np.ones(31)
        data = InitialData.custom(rho, j_min=-15, edge_mode="flat",
                                  edge_values=np.full(30, p.beta / p.alpha))
        rows = large_d_convergence_experiment([1e-2], data, 2.0, p, m=16, dt=2e-3)
        assert rows[0][1] <= 1e-6

    def test_error_decreases(self, p):
        rows = large_d_convergence_experiment([1e-1, 1e-2, 1e-3],
                                              InitialData.left_block(), 5.0, p)
        errs = [e for _, e in rows]
        assert errs[0] > errs[1] > errs[2]
        assert errs[-1] <= 0.05

    def test_rejects_bad_eps(self, p):
        with pytest.raises(ValueError):
            large_d_convergence_experiment([-0.1], InitialData.left_block(), 5.0, p)


class TestAsymptoticSpeedMeasured:
    @pytest.mark.slow
    def test_measured_speed_matches_c_inf(self, p, c_inf):
        cfg = SimulationConfig(T=60.0, dt=0.01, m=8, c_upper_guess=1.5 * c_inf.c_star_inf)
        traj = simulate_asymptotic(InitialData.left_block(), cfg, p)
        trace = estimate_speed(traj, window_fraction=(0.75, 1.0))
        assert abs(trace.fitted_speed - c_inf.c_star_inf) / c_inf.c_star_inf <= 0.03
