"""Constants and covariance kernels against hand values, independent
quadrature oracles, and structural identities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

import rapwalk as rw
from rapwalk.analytics import (
    adaptive_simpson,
    beta_integrand,
    beta_integrand_limit,
    forward_mean_coefficient,
    gamma_0_integral,
    gamma_q_integral,
    gauss_cdf,
    gauss_pdf,
)
from rapwalk.errors import DomainError, QuadratureFailure, SpanViolation, UnsupportedLaw

SQRT2PI = math.sqrt(2 * math.pi)


class TestCharLambdas:
    def test_unity_at_zero(self, law_zoo):
        for law in law_zoo:
            lam, lam_bar = rw.char_lambdas(law, 0.0)
            assert abs(lam - 1.0) < 1e-14 and abs(lam_bar - 1.0) < 1e-14

    def test_two_point_uniform_closed_forms(self, two_point_uniform):
        # 1 - lambda = (1/3)(1 - cos t), 1 - lambda_bar = (1/2)(1 - cos t)
        for t in np.linspace(-math.pi, math.pi, 21):
            lam, lam_bar = rw.char_lambdas(two_point_uniform, t)
            assert abs((1 - lam) - (1 - math.cos(t)) / 3) < 1e-14
            assert abs((1 - lam_bar) - (1 - math.cos(t)) / 2) < 1e-14

    def test_values_at_pi(self, two_point_uniform):
        lam, lam_bar = rw.char_lambdas(two_point_uniform, math.pi)
        assert abs(lam - 1 / 3) < 1e-14
        assert abs(lam_bar) < 1e-14

    def test_bounds_and_ordering(self, law_zoo):
        # lambda >= lambda_bar pointwise (variance of the random chf)
        for law in law_zoo:
            for t in np.linspace(0, math.pi, 40):
                lam, lam_bar = rw.char_lambdas(law, t)
                assert -1e-14 <= lam_bar <= lam + 1e-14
                assert lam <= 1 + 1e-14


class TestBeta:
    def test_two_point_uniform_exact(self, two_point_uniform):
        assert abs(rw.beta_quadrature(two_point_uniform) - 2 / 3) < 1e-10
        assert abs(rw.beta_two_point(two_point_uniform) - 2 / 3) < 1e-15

    def test_deterministic_weights_give_one(self):
        law = rw.Deterministic((0.5, 0.5, 0.0))
        assert abs(rw.beta_quadrature(law) - 1.0) < 1e-10
        assert abs(rw.beta_two_point(law) - 1.0) < 1e-15

    def test_beta_m_over_m_plus_one(self):
        # closed form for Beta(j, m-j) two-point weights
        for m, j in [(2, 1), (3, 1), (5, 2), (7, 6)]:
            assert abs(rw.beta_two_point(rw.TwoPointBeta(m, j)) - m / (m + 1)) < 1e-14

    def test_two_point_closed_form_vs_quadrature(self):
        for m, j in [(3, 1), (5, 2)]:
            law = rw.TwoPointBeta(m, j)
            assert abs(rw.beta_two_point(law) - rw.beta_quadrature(law, tol=1e-10)) < 1e-8

    def test_integrand_limit_fill_in(self, law_zoo):
        # analytic t -> 0 limit vs evaluation just off zero
        for law in law_zoo:
            f = beta_integrand(law)
            assert abs(f(1e-4) - beta_integrand_limit(law)) < 1e-6

    def test_quadrature_vs_scipy_oracle(self):
        law = rw.DirichletWindow((1.0, 1.0, 1.0))
        f = beta_integrand(law)
        oracle, err = integrate.quad(f, 0.0, math.pi, limit=200)
        oracle /= math.pi
        assert err < 1e-10
        assert abs(rw.beta_quadrature(law, tol=1e-10) - oracle) < 1e-9

    def test_span_violation_raises(self):
        with pytest.raises(SpanViolation):
            rw.beta_quadrature(rw.Deterministic((0.5, 0.0, 0.5)))

    def test_unsupported_law_for_two_point_route(self):
        with pytest.raises(UnsupportedLaw):
            rw.beta_two_point(rw.DirichletWindow((1.0, 1.0, 1.0)))

    def test_bounds_for_validated_laws(self, law_zoo):
        for law in law_zoo:
            beta = rw.constants_for(law).beta
            assert 0.0 < beta <= 1.0 + 1e-12

    def test_beta_one_iff_no_drift_noise(self, law_zoo):
        for law in law_zoo:
            c = rw.constants_for(law)
            if c.sigma_D2 == 0.0:
                assert abs(c.beta - 1.0) < 1e-10
            else:
                assert c.beta < 1.0 - 1e-12


class TestConstants:
    def test_two_point_uniform_table(self, two_point_constants):
        c = two_point_constants
        assert c.V == -0.5 and c.b == 0.5
        assert abs(c.sigma_D2 - 1 / 12) < 1e-15
        assert c.sigma_a2 == 0.25
        assert abs(c.beta - 2 / 3) < 1e-14
        assert abs(c.kappa - 0.5) < 1e-14

    def test_kappa_definition_consistency(self, law_zoo):
        # kappa beta sigma_a^2 = sigma_D^2 exactly
        for law in law_zoo:
            c = rw.constants_for(law)
            assert abs(c.kappa * c.beta * c.sigma_a2 - c.sigma_D2) < 1e-15

    def test_invalid_law_rejected(self):
        with pytest.raises(Exception):
            rw.constants_for(rw.Deterministic((0.0, 1.0, 0.0)))


class TestGaussianHelpers:
    def test_psi_at_zero(self):
        pdf, cdf, psi = rw.gaussian_helpers(0.0, 1.0)
        assert abs(psi - 1 / SQRT2PI) < 1e-15
        assert abs(pdf - 1 / SQRT2PI) < 1e-15
        assert cdf == 0.5

    def test_cdf_matches_scipy(self):
        from scipy.stats import norm

        for x in np.linspace(-8, 8, 33):
            assert abs(gauss_cdf(x, 2.5) - norm.cdf(x, scale=math.sqrt(2.5))) < 1e-14

    def test_tail_underflow(self):
        for var in (0.25, 1.0, 9.0):
            x = 40 * math.sqrt(var)
            assert rw.psi(x, var) < 1e-300

    def test_antisymmetry_identity(self):
        # Psi(-x) - Psi(x) = x, since Psi'(x) = Phi(x) - 1
        x = 1.7
        assert abs(rw.psi(-x, 1.0) - rw.psi(x, 1.0) - x) < 1e-14

    def test_degenerate_variance(self):
        assert rw.psi(2.0, 0.0) == 0.0
        assert rw.psi(-2.0, 0.0) == 2.0
        assert gauss_cdf(1.0, 0.0) == 1.0 and gauss_cdf(-1.0, 0.0) == 0.0
        with pytest.raises(DomainError):
            gauss_pdf(0.0, 0.0)

    def test_negative_variance_rejected(self):
        with pytest.raises(DomainError):
            rw.gaussian_helpers(0.0, -1.0)


class TestGammaKernels:
    def test_zero_time_boundary(self, two_point_constants):
        c = two_point_constants
        assert rw.gamma_q(0.0, 1.0, 2.0, -1.0, c) == 0.0
        assert rw.gamma_0(1.0, 1.0, 0.0, -1.0, c.sigma_a2) == 0.0

    def test_gamma_q_diagonal_value(self, two_point_constants):
        # kappa sigma_a sqrt(t/pi) at s=t, q=r
        got = rw.gamma_q(1.0, 0.0, 1.0, 0.0, two_point_constants)
        assert abs(got - 0.25 / math.sqrt(math.pi)) < 1e-14

    def test_gamma_0_diagonal_value(self):
        # (2 - sqrt 2) sqrt(sa2 t / 2 pi) with sa2 t = 1
        got = rw.gamma_0(1.0, 0.0, 1.0, 0.0, 1.0)
        assert abs(got - (2 - math.sqrt(2)) / SQRT2PI) < 1e-14

    def test_gamma_q_integral_oracle(self, two_point_constants):
        c = two_point_constants
        for s, q, t, r in [(1, 0.3, 2, -0.5), (1, 1, 1, 1), (0.5, 0, 2, 0), (2, -1, 2, 1)]:
            assert abs(rw.gamma_q(s, q, t, r, c) - gamma_q_integral(s, q, t, r, c)) < 1e-8

    def test_gamma_0_integral_oracle(self):
        for s, q, t, r in [(1, 0.3, 2, -0.5), (1, 1, 1, 1), (0.5, 0, 2, 0), (2, -1, 2, 1)]:
            assert abs(rw.gamma_0(s, q, t, r, 1.0) - gamma_0_integral(s, q, t, r, 1.0)) < 1e-8

    @given(
        st.floats(0.01, 3.0), st.floats(-2.0, 2.0),
        st.floats(0.01, 3.0), st.floats(-2.0, 2.0),
    )
    @settings(max_examples=80, deadline=None)
    def test_symmetry(self, s, q, t, r):
        c = rw.constants_for(rw.TwoPointBeta(2, 1))
        assert rw.gamma_q(s, q, t, r, c) == pytest.approx(rw.gamma_q(t, r, s, q, c), abs=1e-14)
        assert rw.gamma_0(s, q, t, r, 0.25) == pytest.approx(rw.gamma_0(t, r, s, q, 0.25), abs=1e-14)

    def test_negative_time_rejected(self, two_point_constants):
        with pytest.raises(DomainError):
            rw.gamma_q(-1.0, 0.0, 1.0, 0.0, two_point_constants)


class TestRapCovariance:
    def test_all_noise_off(self, two_point_constants):
        dead = rw.CovParams(rho_bar=0.0, v_bar=0.0)
        assert rw.rap_covariance(1.0, 0.5, 2.0, -0.5, dead, two_point_constants) == 0.0

    def test_stationary_fbm_identity(self, two_point_constants):
        # v = kappa rho^2 collapses the sum to the Hurst-1/4 form
        c = two_point_constants
        rho = 2.0
        params = rw.CovParams(rho_bar=rho, v_bar=c.kappa * rho * rho)
        for s in (0.25, 0.7, 1.0, 1.8):
            for t in (0.25, 1.0, 2.5):
                for d in (0.0, 0.6, 1.7):
                    lhs = rw.rap_covariance(s, 0.0, t, d, params, c)
                    rhs = c.kappa * rho**2 * (
                        rw.psi(d, c.sigma_a2 * s) + rw.psi(d, c.sigma_a2 * t)
                        - rw.psi(d, c.sigma_a2 * abs(t - s))
                    )
                    assert abs(lhs - rhs) < 1e-10

    def test_stationary_diagonal_value(self, two_point_constants):
        # sigma_a kappa rho^2 / sqrt(2 pi) * 2 sqrt(t) at q=r, s=t=1, rho=2
        c = two_point_constants
        params = rw.CovParams(rho_bar=2.0, v_bar=c.kappa * 4.0)
        got = rw.rap_covariance(1.0, 0.0, 1.0, 0.0, params, c)
        assert abs(got - 2.0 / SQRT2PI) < 1e-14
        assert abs(rw.stationary_temporal_covariance(1.0, 1.0, 2.0, c) - 2.0 / SQRT2PI) < 1e-14

    def test_temporal_specialization_matches_general(self, two_point_constants):
        c = two_point_constants
        params = rw.CovParams(rho_bar=1.3, v_bar=0.4)
        for s, t in [(0.5, 1.0), (1.0, 1.0), (0.2, 2.0)]:
            assert rw.rap_covariance_temporal(s, t, params, c) == pytest.approx(
                rw.rap_covariance(s, 0.7, t, 0.7, params, c), abs=1e-12
            )

    def test_gram_positive_semidefinite(self, two_point_constants):
        params = rw.CovParams(rho_bar=1.0, v_bar=0.5)
        pts = [(0.3, -0.7), (0.3, 0.4), (0.9, 0.0), (1.4, 1.0), (2.0, -1.2), (2.0, 0.8)]
        g = np.array([
            [rw.rap_covariance(s, q, t, r, params, two_point_constants) for t, r in pts]
            for s, q in pts
        ])
        assert np.allclose(g, g.T, atol=1e-14)
        assert np.linalg.eigvalsh(g).min() >= -1e-9

    def test_forward_coefficient(self, two_point_constants):
        # c_a = sigma_D^2 / (beta sqrt(pi sigma_a^2)) = 1/(4 sqrt(pi)) here
        assert abs(forward_mean_coefficient(two_point_constants) - 0.25 / math.sqrt(math.pi)) < 1e-14


class TestAdaptiveSimpson:
    def test_polynomial_exact(self):
        assert adaptive_simpson(lambda x: x**3 - x, 0, 2, 1e-12) == pytest.approx(2.0, abs=1e-12)

    def test_oscillatory_vs_scipy(self):
        f = lambda x: math.cos(7 * x) * math.exp(-x)
        want, _ = integrate.quad(f, 0, math.pi)
        assert adaptive_simpson(f, 0, math.pi, 1e-11) == pytest.approx(want, abs=1e-9)

    def test_depth_budget_raises(self):
        spike = lambda x: 1.0 / math.sqrt(abs(x - 0.123456789) + 1e-300)
        with pytest.raises(QuadratureFailure):
            adaptive_simpson(spike, 0, 1, 1e-14, max_depth=8)
