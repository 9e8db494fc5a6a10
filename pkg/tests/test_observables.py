import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from sheavg.errors import ConfigError
from sheavg.model import SigmaFamily
from sheavg.observables import (AverageSample, EtaCurve, average_weights,
                                covariance_se, estimate_eta, limit_covariance,
                                limit_cross_covariance, prelimit_covariance,
                                prelimit_cross_covariance, spatial_average,
                                two_point_cov, window_mass_factor)
from sheavg.oracles import pam_second_moment
from sheavg.solver import Grid

# frozen by adaptive Gauss-Kronrod quadrature of the windowed covariance
# integrand at tolerance 1e-13 (eta = 1, t = 1, R = 5)
FROZEN_CR_R5 = 1.8495494443872669


def grid_for(radius, T=0.25, dx=0.05, dt=1e-3, times=(0.25,)):
    return Grid.build(T=T, dt=dt, dx=dx, r_max=radius, output_times=times)


def fine_constant_eta(value=1.0, t=1.0, nodes=2001):
    return EtaCurve.constant([[value]], np.linspace(0.0, t, nodes))


class TestSpatialAverage:
    def test_constant_one_averages_to_zero(self):
        g = grid_for(2.0)
        f = spatial_average(np.ones((1, g.nx)), g, 2.0)
        assert abs(f[0]) < 1e-12

    def test_constant_shift(self):
        g = grid_for(2.0)
        for c in (0.5, -1.25):
            f = spatial_average((1.0 + c) * np.ones((1, g.nx)), g, 2.0)
            assert f[0] == pytest.approx(2.0 * c * math.sqrt(2.0), rel=1e-12)

    def test_affine_additivity(self):
        g = grid_for(2.0)
        rng = np.random.default_rng(0)
        u, w = rng.normal(size=(2, 1, g.nx))
        lhs = spatial_average(u + w, g, 2.0)
        rhs = (spatial_average(u, g, 2.0) + spatial_average(w, g, 2.0)
               + 2.0 * math.sqrt(2.0))
        assert_allclose(lhs, rhs, atol=1e-12)

    def test_weights_cover_exactly_2R(self):
        g = grid_for(2.0)
        for R in (0.5, 1.0, 2.0, 1.37):
            w = average_weights(g, R)
            assert np.sum(w) == pytest.approx(2.0 * R, abs=1e-12)
            assert np.all(w >= 0.0) and np.all(w <= g.dx + 1e-15)

    def test_radius_beyond_margin_rejected(self):
        g = grid_for(1.0)
        with pytest.raises(ConfigError):
            spatial_average(np.ones((1, g.nx)), g, g.margin + 0.5)

    def test_average_sample_relation(self):
        f = np.arange(8.0).reshape(2, 2, 2)
        s = AverageSample(replica_id=3, times=(0.5, 1.0), radii=(2.0, 8.0), f=f)
        assert_allclose(s.g[:, 0], f[:, 0] * math.sqrt(2.0), rtol=0)
        assert_allclose(s.g[:, 1], f[:, 1] * math.sqrt(8.0), rtol=0)


class TestEtaCurve:
    def test_constant_values(self):
        S = np.array([[1.0, 2.0], [0.5, -1.0]])
        eta = EtaCurve.constant(S, [0.0, 0.5, 1.0])
        want = np.einsum("ik,jk->kij", S, S)
        for a in range(3):
            assert_allclose(eta.values[a], want, rtol=0)
        assert eta.provenance == "closed-form-constant"

    def test_rows_roundtrip(self):
        S = np.array([[1.0, 2.0], [0.5, -1.0]])
        eta = EtaCurve.constant(S, [0.0, 0.5, 1.0])
        again = EtaCurve.from_rows(eta.to_rows(), provenance=eta.provenance)
        assert_allclose(again.values, eta.values, rtol=0)
        assert_allclose(again.times, eta.times, rtol=0)

    def test_symmetry_enforced(self):
        vals = np.zeros((2, 1, 2, 2))
        vals[:, 0] = [[1.0, 0.5], [0.1, 1.0]]
        with pytest.raises(ConfigError):
            EtaCurve([0.0, 1.0], vals, None, "monte-carlo")

    def test_psd_blocks_for_constant(self):
        S = np.array([[1.0, 2.0], [0.5, -1.0]])
        eta = EtaCurve.constant(S, [0.0, 1.0])
        assert np.all(eta.min_eigenvalues() >= -1e-12)

    def test_interp_bounds(self):
        eta = fine_constant_eta()
        with pytest.raises(ConfigError):
            eta.interp(1.5)


class TestEstimateEta:
    def test_constant_sigma_exact_with_zero_variance(self):
        g = Grid.build(T=0.05, dt=1e-3, dx=0.1, r_max=0.6,
                       output_times=[0.05])
        fam = SigmaFamily.constant([[1.5]])
        eta = estimate_eta(fam.build(), g, [0.0, 0.05], replicas=8, seed=3)
        assert_allclose(eta.values, 2.25, rtol=0)
        assert_allclose(eta.se, 0.0, atol=0)

    def test_time_zero_is_deterministic(self):
        g = Grid.build(T=0.05, dt=1e-3, dx=0.1, r_max=0.6,
                       output_times=[0.05])
        fam = SigmaFamily.bounded_smooth([[1.0]], [[0.5]], [[[1.0]]])
        field = fam.build()
        eta = estimate_eta(field, g, [0.0, 0.05], replicas=8, seed=3)
        want = float(field.sigma(np.ones(1))[0, 0]) ** 2
        assert eta.values[0, 0, 0, 0] == pytest.approx(want, rel=1e-12)
        assert eta.se[0, 0, 0, 0] < 1e-14

    def test_linear_family_matches_volterra_oracle(self):
        # sigma(u) = u: eta(r) = E[u(r)^2] solves the singular Volterra
        # equation; Monte Carlo at modest size must agree within noise
        T = 0.5
        g = Grid.build(T=T, dt=1e-3, dx=0.05, r_max=6.0 * math.sqrt(2 * T),
                       output_times=[T])
        fam = SigmaFamily.affine([[0.0]], [[[1.0]]])
        eta = estimate_eta(fam.build(), g, [0.0, 0.25, 0.5], replicas=400,
                           seed=11)
        sol = pam_second_moment(1.0, T, tol=1e-9)
        for idx, r in enumerate([0.0, 0.25, 0.5]):
            want = sol.interp(r)
            tol = 3.0 * eta.se[idx, 0, 0, 0] + 0.05 * want
            assert abs(eta.values[idx, 0, 0, 0] - want) < tol


class TestCovarianceQuadratures:
    def test_limit_constant_eta(self):
        eta = fine_constant_eta()
        assert limit_covariance(eta, 1.0)[0, 0] == pytest.approx(2.0, abs=1e-12)

    def test_limit_matches_2t_ssT(self):
        S = np.array([[1.0, 0.5], [0.0, 2.0]])
        eta = EtaCurve.constant(S, np.linspace(0, 1, 11))
        for t in (0.3, 1.0):
            assert_allclose(limit_covariance(eta, t), 2 * t * (S @ S.T),
                            atol=1e-12)

    def test_prelimit_frozen_regression_value(self):
        # the independent oracle: adaptive quadrature of the closed form
        def integrand(r):
            return 2.0 * window_mass_factor(2.0 * (1.0 - r), 5.0)

        ref, err = integrate.quad(integrand, 0.0, 1.0, epsabs=1e-13,
                                  epsrel=1e-13, limit=400)
        assert abs(ref - FROZEN_CR_R5) < 1e-10
        got = prelimit_covariance(fine_constant_eta(), 1.0, 5.0)[0, 0]
        assert abs(got - FROZEN_CR_R5) < 2e-6

    def test_prelimit_below_limit_for_psd_diagonal(self):
        eta = fine_constant_eta()
        c = limit_covariance(eta, 1.0)[0, 0]
        for R in (1.0, 5.0, 50.0):
            assert prelimit_covariance(eta, 1.0, R)[0, 0] <= c + 1e-12

    def test_prelimit_converges_to_limit(self):
        # |C^R - C| = 0.752.../R to leading order, so 1e-6 needs R = 1e6
        eta = fine_constant_eta()
        c = limit_covariance(eta, 1.0)[0, 0]
        gaps = [abs(prelimit_covariance(eta, 1.0, R)[0, 0] - c)
                for R in (1e2, 1e3, 1e4, 1e5, 1e6)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-6

    def test_gap_decreasing_on_dyadic_grid(self):
        S = np.array([[1.0, 0.5], [0.0, 2.0]])
        eta = EtaCurve.constant(S, np.linspace(0, 1, 201))
        c = limit_covariance(eta, 1.0)
        gaps = [np.linalg.norm(prelimit_covariance(eta, 1.0, R) - c)
                for R in (2.0, 4.0, 8.0, 16.0, 32.0)]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_symmetric_psd_output(self):
        rng = np.random.default_rng(7)
        raw = rng.normal(size=(2, 3))
        eta = EtaCurve.constant(raw, np.linspace(0, 1, 51))
        for R in (2.0, 8.0):
            cr = prelimit_covariance(eta, 1.0, R)
            assert_allclose(cr, cr.T, rtol=0)
            assert np.linalg.eigvalsh(cr).min() >= -1e-12

    def test_cross_reduces_to_single_time(self):
        eta = fine_constant_eta()
        a = prelimit_cross_covariance(eta, 1.0, 1.0, 4.0)
        b = prelimit_covariance(eta, 1.0, 4.0)
        assert_allclose(a, b, rtol=0)

    def test_cross_limit_uses_min_time(self):
        eta = fine_constant_eta()
        got = limit_cross_covariance(eta, 0.5, 1.0)[0, 0]
        assert got == pytest.approx(1.0, abs=1e-12)

    def test_time_outside_grid_rejected(self):
        eta = fine_constant_eta(t=0.5)
        with pytest.raises(ConfigError):
            limit_covariance(eta, 0.75)

    def test_propagated_se_linear(self):
        eta = fine_constant_eta()
        eta.se = np.full_like(eta.values, 0.01)
        se = covariance_se(eta, 1.0)
        assert se[0, 0] == pytest.approx(0.02, rel=1e-10)
        se_r = covariance_se(eta, 1.0, R=5.0)
        assert 0.0 < se_r[0, 0] <= se[0, 0]


class TestWindowMassFactor:
    def test_bounds_and_zero_limit(self):
        s = np.linspace(0.0, 10.0, 101)
        vals = window_mass_factor(s, 3.0)
        assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
        assert vals[0] == 1.0

    def test_matches_direct_quadrature(self):
        from sheavg.model import heat_kernel

        for s, R in [(0.5, 2.0), (2.0, 1.0), (4.0, 8.0)]:
            ref, _ = integrate.quad(
                lambda z: heat_kernel(s, z) * (2.0 - z / R), 0.0, 2.0 * R,
                epsabs=1e-13)
            assert window_mass_factor(s, R) == pytest.approx(ref, abs=1e-10)


class TestTwoPointCov:
    def test_additive_oracle_value(self):
        eta = fine_constant_eta()
        got = two_point_cov(eta, 1.0, 1.0, 0.0)[0, 0]
        assert got == pytest.approx(1.0 + 1.0 / math.sqrt(math.pi), abs=1e-6)

    def test_large_lag_decouples(self):
        eta = fine_constant_eta()
        assert two_point_cov(eta, 1.0, 1.0, 50.0)[0, 0] == pytest.approx(
            1.0, abs=1e-12)

    def test_zero_time_is_product_of_means(self):
        eta = fine_constant_eta()
        assert_allclose(two_point_cov(eta, 1.0, 0.0, 0.3), np.ones((1, 1)),
                        rtol=0)

    def test_distinct_times_against_quadrature(self):
        eta = fine_constant_eta()
        t, s, h = 1.0, 0.5, 0.7

        def integrand(r):
            return math.exp(-h * h / (2 * (t + s - 2 * r))) / math.sqrt(
                2 * math.pi * (t + s - 2 * r))

        ref, _ = integrate.quad(integrand, 0.0, s, epsabs=1e-12)
        got = two_point_cov(eta, t, s, h)[0, 0]
        assert got == pytest.approx(1.0 + ref, abs=1e-8)
