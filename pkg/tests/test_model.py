import math

import numpy as np
import pytest

from cityroad.model import (
    EdgeGrid,
    LatticeState,
    Parameters,
    eval_nonlinearity,
    logistic,
    rescale_to_unit_length,
    stationary_from_rho,
    stationary_residual,
    tabulated,
    total_mass,
)


def make_state(rho, m=8, p=None, edges=None):
    rho = np.asarray(rho, dtype=float)
    if edges is None:
        edges = np.zeros((len(rho) - 1, m + 1))
    return LatticeState(0, len(rho) - 1, rho, edges, 0.0)


class TestRescale:
    def test_length_two_rescaling(self):
        p = Parameters(2.0, 1.0, 8.0, ell=2.0)
        scaled, factor = rescale_to_unit_length(p)
        assert scaled.alpha == 1.0
        assert scaled.beta == 1.0
        assert scaled.d == 2.0
        assert scaled.ell == 1.0
        assert factor == 2.0

    def test_identity(self):
        p = Parameters(1.0, 1.0, 1.0)
        scaled, factor = rescale_to_unit_length(p)
        assert scaled is p
        assert factor == 1.0

    def test_direct_substitution(self):
        p = Parameters(0.5, 3.0, 0.25, ell=0.5)
        scaled, factor = rescale_to_unit_length(p)
        assert scaled.alpha == pytest.approx(1.0, abs=0)
        assert scaled.beta == 3.0
        assert scaled.d == pytest.approx(1.0, abs=0)
        assert factor == 0.5

    def test_idempotent(self):
        p = Parameters(0.5, 3.0, 0.25, ell=0.5)
        once, _ = rescale_to_unit_length(p)
        twice, factor = rescale_to_unit_length(once)
        assert twice is once
        assert factor == 1.0

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            Parameters(-1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            Parameters(1.0, 1.0, 0.0)


class TestNonlinearity:
    def test_logistic_fixed_points(self):
        nl = logistic(1.0)
        assert eval_nonlinearity(nl, 0.0) == 0.0
        assert eval_nonlinearity(nl, 1.0) == 0.0

    def test_logistic_midpoint(self):
        assert eval_nonlinearity(logistic(1.0), 0.5) == 0.25

    def test_zero_rate_allowed(self):
        nl = logistic(0.0)
        assert eval_nonlinearity(nl, 0.3) == 0.0

    def test_tabulated_admissible(self):
        u = np.linspace(-0.5, 1.5, 41)
        nl = tabulated(u, 1.0 * u * (1.0 - u), fprime0=1.0)
        mid = eval_nonlinearity(nl, 0.5)
        assert mid == pytest.approx(0.25, abs=2e-3)

    def test_tabulated_rejects_kpp_violation(self):
        u = np.linspace(-0.5, 1.5, 41)
        with pytest.raises(ValueError):
            # exceeds fprime0 * u near zero
            tabulated(u, 2.0 * u * (1.0 - u), fprime0=1.0)

    def test_rejects_sign_violation_outside(self):
        u = np.linspace(-0.5, 1.5, 41)
        vals = u * (1.0 - u)
        vals[u < 0] = 0.1  # must be negative there
        with pytest.raises(ValueError):
            tabulated(u, vals, fprime0=1.0)


class TestTotalMass:
    def test_zero_state(self):
        s = make_state([0.0, 0.0, 0.0])
        assert total_mass(s) == 0.0

    def test_single_vertex(self):
        s = make_state([1.0, 0.0])
        assert total_mass(s) == 1.0

    def test_constant_state_exact(self, params_unit):
        # n vertices at 1, n-1 edges at beta/alpha: trapezoid of a constant is exact
        n = 6
        p = Parameters(2.0, 3.0, 1.0)
        rho = np.ones(n)
        edges = np.full((n - 1, 9), p.beta / p.alpha)
        s = LatticeState(0, n - 1, rho, edges, 0.0)
        assert total_mass(s) == pytest.approx(n + (n - 1) * p.beta / p.alpha, rel=1e-15)

    def test_linearity_and_translation(self):
        rng = np.random.default_rng(3)
        rho = rng.uniform(0, 1, 5)
        edges = rng.uniform(0, 1, (4, 9))
        s1 = LatticeState(0, 4, rho, edges, 0.0)
        s2 = LatticeState(-7, -3, rho, edges, 0.0)  # translated window
        assert total_mass(s1) == total_mass(s2)
        s3 = LatticeState(0, 4, 2.0 * rho, 2.0 * edges, 0.0)
        assert total_mass(s3) == pytest.approx(2.0 * total_mass(s1), rel=1e-14)


class TestStationary:
    def test_constant_one_gives_beta_over_alpha(self, params_unit):
        prof = stationary_from_rho(np.ones(5), params_unit)
        assert np.allclose(prof.slope, 0.0)
        assert np.allclose(prof.intercept, 1.0)

    def test_zero(self, params_unit):
        prof = stationary_from_rho(np.zeros(4), params_unit)
        assert np.all(prof.slope == 0.0)
        assert np.all(prof.intercept == 0.0)

    def test_against_2x2_solve(self, params_unit):
        # the endpoint values must solve (d+a, -d; -d, d+a) (v0,v1) = beta (rj, rj1)
        p = params_unit
        rho = np.array([1.0, 0.0])
        prof = stationary_from_rho(rho, p)
        mat = np.array([[p.d + p.alpha, -p.d], [-p.d, p.d + p.alpha]])
        v = np.linalg.solve(mat, p.beta * rho)
        assert prof.intercept[0] == pytest.approx(v[0], rel=1e-14)
        assert prof.intercept[0] + prof.slope[0] == pytest.approx(v[1], rel=1e-14)

    def test_robin_conditions_within_ulps(self):
        p = Parameters(0.7, 1.3, 2.1)
        rng = np.random.default_rng(11)
        rho = rng.uniform(0, 2, 9)
        prof = stationary_from_rho(rho, p)
        a, b = prof.slope, prof.intercept
        left = -p.d * a + p.alpha * b - p.beta * rho[:-1]
        right = p.d * a + p.alpha * (a + b) - p.beta * rho[1:]
        scale = np.finfo(float).eps * np.maximum(1.0, np.abs(p.beta * rho[:-1]))
        assert np.all(np.abs(left) <= 8 * scale)
        assert np.all(np.abs(right) <= 8 * scale)

    def test_rejects_nonfinite(self, params_unit):
        with pytest.raises(ValueError):
            stationary_from_rho([1.0, np.nan], params_unit)


class TestStationaryResidual:
    def test_ones_and_zeros(self, params_unit):
        assert np.allclose(stationary_residual(np.ones(5), params_unit), 0.0)
        assert np.allclose(stationary_residual(np.zeros(5), params_unit), 0.0)

    def test_hand_expansion(self, params_unit):
        eps = 0.01
        r = stationary_residual(np.array([0.0, eps, 0.0]), params_unit)
        expected = (1.0 / 3.0) * (-2.0 * eps) + eps * (1.0 - eps)
        assert r[0] == pytest.approx(expected, rel=1e-14)

    def test_constant_gives_f(self, params_unit):
        for c in (0.2, 0.7, 1.5):
            r = stationary_residual(np.full(6, c), params_unit)
            assert np.allclose(r, params_unit.f(c), rtol=0, atol=1e-15)

    def test_sine_mode_is_laplacian_eigenvector(self, params_unit):
        # the discrete Laplacian acts as -2(1 - cos(pi/(N+1))) on the sine arch
        n = 7
        js = np.arange(0, n + 2)
        rho = np.sin(js * math.pi / (n + 1))
        lam = 2.0 * (1.0 - math.cos(math.pi / (n + 1)))
        coef = params_unit.beta * params_unit.d / (2 * params_unit.d + params_unit.alpha)
        r = stationary_residual(rho, params_unit)
        expected = -coef * lam * rho[1:-1] + params_unit.f(rho[1:-1])
        assert np.allclose(r, expected, atol=1e-14)


class TestContainers:
    def test_edge_grid_validation(self):
        with pytest.raises(ValueError):
            EdgeGrid([1.0, 2.0])  # m < 2
        with pytest.raises(ValueError):
            EdgeGrid([1.0, np.inf, 2.0])
        g = EdgeGrid([0.0, 1.0, 2.0, 3.0])
        assert g.m == 3
        assert g.dx == pytest.approx(1.0 / 3.0)

    def test_lattice_state_validation(self):
        with pytest.raises(ValueError):
            LatticeState(0, 2, np.ones(3), np.ones((1, 9)), 0.0)  # edge count
        with pytest.raises(ValueError):
            LatticeState(0, 1, np.array([1.0, np.nan]), np.ones((1, 9)), 0.0)

    def test_states_are_immutable(self):
        s = make_state([0.5, 0.5, 0.5])
        with pytest.raises(ValueError):
            s.rho[0] = 2.0
