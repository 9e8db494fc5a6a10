import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import sheavg.oracles as oracles
from sheavg.errors import ConfigError, NumericalError
from sheavg.observables import limit_covariance, prelimit_covariance
from sheavg.oracles import (additive_point_variance, constant_sigma_law,
                            pam_second_moment)


def picard_reference(lam, horizon, npts=4001, iters=24):
    """Independent check: Picard iteration with the cusp-removing
    substitution r = t - w^2 evaluated by trapezoid quadrature."""
    ts = np.linspace(0.0, horizon, npts)
    f = np.ones(npts)
    for _ in range(iters):
        g = np.empty(npts)
        g[0] = 1.0
        for a in range(1, npts):
            t = ts[a]
            ws = np.linspace(0.0, math.sqrt(t), 257)
            vals = np.interp(t - ws * ws, ts, f)
            g[a] = 1.0 + lam * lam * np.trapezoid(vals / math.sqrt(math.pi), ws)
        f = g
    return ts, f


class TestPamSecondMoment:
    def test_zero_coupling_is_constant(self):
        sol = pam_second_moment(0.0, 1.0, steps=16, tol=1e-10)
        assert np.all(sol.values == 1.0)

    def test_initial_value(self):
        sol = pam_second_moment(1.0, 0.5, tol=1e-8)
        assert sol.values[0] == 1.0

    def test_small_time_picard_dominates(self):
        sol = pam_second_moment(1.0, 0.01, tol=1e-9)
        # at t = 0.001 the second-order term t/4 is far below 1e-3
        assert abs(sol.interp(0.001) - (1.0 + math.sqrt(0.001 / math.pi))) < 1e-3
        # at t = 0.01 the expansion 1 + sqrt(t/pi) + t/4 holds to O(t^{3/2})
        expansion = 1.0 + math.sqrt(0.01 / math.pi) + 0.01 / 4.0
        assert abs(sol.interp(0.01) - expansion) < 5e-4

    def test_monotone_nondecreasing(self):
        sol = pam_second_moment(1.0, 1.0, tol=1e-8)
        assert np.all(np.diff(sol.values) >= -1e-12)

    def test_self_consistency_error_below_tol(self):
        sol = pam_second_moment(1.0, 1.0, tol=1e-8)
        assert sol.error_estimate < 1e-8

    def test_against_picard_iteration(self):
        ts, ref = picard_reference(1.0, 1.0)
        sol = pam_second_moment(1.0, 1.0, tol=1e-10)
        got = np.array([sol.interp(t) for t in ts[:: len(ts) // 16]])
        want = ref[:: len(ts) // 16]
        assert np.max(np.abs(got - want)) < 5e-5

    def test_nonconvergence_raises(self, monkeypatch):
        monkeypatch.setattr(oracles, "MAX_VOLTERRA_STEPS", 128)
        with pytest.raises(NumericalError):
            pam_second_moment(1.0, 1.0, steps=16, tol=0.0)

    def test_input_validation(self):
        with pytest.raises(ConfigError):
            pam_second_moment(1.0, -1.0)
        with pytest.raises(ConfigError):
            pam_second_moment(1.0, 1.0, steps=8)

    def test_eta_curve_view(self):
        sol = pam_second_moment(0.7, 0.5, tol=1e-8)
        eta = sol.eta_curve()
        assert eta.provenance == "volterra-pam"
        assert eta.values.shape[1:] == (1, 1, 1)
        assert_allclose(eta.values[:, 0, 0, 0], 0.49 * sol.values, rtol=1e-15)


class TestAdditivePointVariance:
    def test_closed_form(self):
        assert additive_point_variance(1.0) == pytest.approx(
            1.0 / math.sqrt(math.pi), rel=1e-15)
        assert additive_point_variance(0.0) == 0.0

    def test_sqrt_t_scaling(self):
        for t in (0.1, 0.5, 2.0):
            assert additive_point_variance(4 * t) == pytest.approx(
                2 * additive_point_variance(t), rel=1e-14)

    def test_rejects_negative(self):
        with pytest.raises(ConfigError):
            additive_point_variance(-0.5)


class TestConstantSigmaLaw:
    def test_scalar_limit(self):
        law = constant_sigma_law(np.ones((1, 1)), t=1.0, R=5.0)
        assert law.C.a[0, 0] == pytest.approx(2.0, abs=1e-12)
        assert law.exact_gaussian

    def test_identity_matrix(self):
        law = constant_sigma_law(np.eye(2), t=0.5, R=4.0)
        assert_allclose(law.C.a, np.eye(2), atol=1e-12)

    def test_shares_quadrature_code_path(self):
        from sheavg.observables import EtaCurve

        t, R, nodes = 1.0, 5.0, 2001
        law = constant_sigma_law(np.ones((1, 1)), t=t, R=R, eta_nodes=nodes)
        eta = EtaCurve.constant(np.ones((1, 1)), np.linspace(0.0, t, nodes))
        assert law.CR.a[0, 0] == prelimit_covariance(eta, t, R)[0, 0]
        assert law.C.a[0, 0] == limit_covariance(eta, t)[0, 0]
