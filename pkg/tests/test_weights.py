"""Weight-law moment queries against hand values and sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import rapwalk as rw
from rapwalk.errors import InvalidLaw
from rapwalk.weights import support_span


class TestAnnealedVector:
    def test_two_point_beta_uniform(self):
        p = rw.annealed_vector(rw.TwoPointBeta(2, 1))
        assert np.allclose(p, [0.5, 0.5, 0.0], atol=1e-15)

    def test_deterministic_identity(self):
        v = (0.2, 0.5, 0.3)
        assert np.allclose(rw.annealed_vector(rw.Deterministic(v)), v)

    def test_mixture_average(self):
        law = rw.FiniteMixture(((0.5, (1.0, 0.0, 0.0)), (0.5, (0.0, 1.0, 0.0))))
        assert np.allclose(rw.annealed_vector(law), [0.5, 0.5, 0.0])

    def test_invalid_parameters_rejected(self):
        with pytest.raises(InvalidLaw):
            rw.TwoPointBeta(2, 2)  # j >= m
        with pytest.raises(InvalidLaw):
            rw.TwoPointBeta(1, 1)
        with pytest.raises(InvalidLaw):
            rw.Deterministic((0.5, 0.6, 0.0))  # sums to 1.1
        with pytest.raises(InvalidLaw):
            rw.DirichletWindow((1.0, -1.0, 1.0))

    def test_renormalization_within_tolerance(self):
        v = np.array([0.5, 0.5, 0.0])
        v[0] += 4e-13  # deficit below 1e-12 is renormalized
        law = rw.Deterministic(tuple(v))
        assert abs(sum(law.probs) - 1.0) < 1e-15


class TestSecondMoments:
    def test_two_point_beta_uniform_values(self):
        s = rw.second_moments(rw.TwoPointBeta(2, 1)).matrix
        # u ~ Uniform(0,1): E[u^2] = 1/3, E[u(1-u)] = 1/6
        assert abs(s[0, 0] - 1 / 3) < 1e-15
        assert abs(s[1, 1] - 1 / 3) < 1e-15
        assert abs(s[0, 1] - 1 / 6) < 1e-15

    def test_deterministic_outer_product(self):
        v = np.array([0.2, 0.5, 0.3])
        s = rw.second_moments(rw.Deterministic(tuple(v))).matrix
        assert np.allclose(s, np.outer(v, v))

    def test_rows_marginalize_to_annealed(self, law_zoo):
        for law in law_zoo:
            s = rw.second_moments(law)
            assert np.allclose(s.row_sums(), rw.annealed_vector(law), atol=1e-14)

    def test_dirichlet_closed_form(self):
        a = np.array([2.0, 0.5, 1.0])
        s = rw.second_moments(rw.DirichletWindow(tuple(a))).matrix
        a0 = a.sum()
        for i in range(3):
            for j in range(3):
                expect = a[i] * (a[i] + 1) / (a0 * (a0 + 1)) if i == j else a[i] * a[j] / (a0 * (a0 + 1))
                assert abs(s[i, j] - expect) < 1e-15

    def test_positive_semidefinite(self, law_zoo):
        for law in law_zoo:
            eig = np.linalg.eigvalsh(rw.second_moments(law).matrix)
            assert eig.min() > -1e-12


class TestDriftMoments:
    def test_two_point_beta_uniform(self):
        mom = rw.drift_moments(rw.TwoPointBeta(2, 1))
        assert abs(mom.V + 0.5) < 1e-15
        assert abs(mom.sigma_D2 - 1 / 12) < 1e-15
        assert abs(mom.sigma_a2 - 0.25) < 1e-15

    def test_deterministic_has_no_environment_noise(self):
        mom = rw.drift_moments(rw.Deterministic((0.25, 0.5, 0.25)))
        assert mom.sigma_D2 == 0.0

    def test_two_point_annealed_variance_identity(self):
        # support {-1, 0}: sigma_a^2 = p(0,0) p(0,-1)
        for m, j in [(2, 1), (3, 1), (5, 2), (7, 6)]:
            mom = rw.drift_moments(rw.TwoPointBeta(m, j))
            p = rw.annealed_vector(rw.TwoPointBeta(m, j))
            assert abs(mom.sigma_a2 - p[0] * p[1]) < 1e-15

    def test_mixture_brute_force(self, rng):
        comps = []
        weights = rng.dirichlet(np.ones(3))
        for w in weights:
            v = rng.dirichlet(np.ones(5))
            comps.append((float(w), tuple(v)))
        law = rw.FiniteMixture(tuple(comps))
        mom = rw.drift_moments(law)
        x = np.arange(-2, 3, dtype=float)
        drifts = np.array([v @ x for _, v in [(w, np.array(v)) for w, v in comps]])
        ws = np.array([w for w, _ in comps])
        v_expect = float(ws @ drifts)
        sd2_expect = float(ws @ drifts**2) - v_expect**2
        assert abs(mom.V - v_expect) < 1e-14
        assert abs(mom.sigma_D2 - sd2_expect) < 1e-14

    def test_total_variance_ordering(self, law_zoo):
        # sigma_a^2 >= sigma_D^2 by the law of total variance
        for law in law_zoo:
            mom = rw.drift_moments(law)
            assert mom.sigma_a2 >= mom.sigma_D2 - 1e-15

    @given(st.lists(st.floats(0.05, 10.0), min_size=3, max_size=7))
    @settings(max_examples=50, deadline=None)
    def test_total_variance_ordering_dirichlet(self, alphas):
        if len(alphas) % 2 == 0:
            alphas = alphas[:-1]
        mom = rw.drift_moments(rw.DirichletWindow(tuple(alphas)))
        assert mom.sigma_a2 >= mom.sigma_D2 - 1e-12


class TestValidate:
    def test_two_point_beta_passes(self):
        diag = rw.validate(rw.TwoPointBeta(2, 1))
        assert diag.ok and diag.span == 1 and diag.elliptic

    def test_point_mass_fails_ellipticity(self):
        diag = rw.validate(rw.Deterministic((0.0, 1.0, 0.0)))
        assert not diag.elliptic
        assert any("ellipticity" in f for f in diag.failures)

    def test_even_support_fails_span(self):
        law = rw.Deterministic((0.5, 0.0, 0.5))  # steps -1, +1 only
        diag = rw.validate(law)
        assert diag.span == 2
        assert any("span" in f for f in diag.failures)

    def test_delta_mixture_fails_ellipticity(self):
        law = rw.FiniteMixture(((0.5, (1.0, 0.0, 0.0)), (0.5, (0.0, 1.0, 0.0))))
        assert not rw.validate(law).ok

    def test_support_span_helper(self):
        assert support_span(np.array([0.5, 0.5, 0.0]), np.arange(-1, 2)) == 1
        assert support_span(np.array([0.5, 0.0, 0.5]), np.arange(-1, 2)) == 2
        assert support_span(np.array([0.0, 1.0, 0.0]), np.arange(-1, 2)) == 0


class TestSampling:
    N = 1_000_000

    def _check_moments(self, law):
        u = np.random.default_rng(7).random((self.N, max(law.uniforms_per_site, 1)))
        vecs = law.vectors_from_uniforms(u[:, : law.uniforms_per_site])
        assert vecs.shape == (self.N, 2 * law.range_m + 1)
        assert np.all(vecs >= 0)
        assert np.allclose(vecs.sum(axis=1), 1.0, atol=1e-12)
        p = rw.annealed_vector(law)
        s = rw.second_moments(law).matrix
        mean = vecs.mean(axis=0)
        se = vecs.std(axis=0, ddof=1) / math.sqrt(self.N) + 1e-12
        assert np.all(np.abs(mean - p) <= 4 * se)
        for i in range(vecs.shape[1]):
            for j in range(i, vecs.shape[1]):
                prod = vecs[:, i] * vecs[:, j]
                se_ij = prod.std(ddof=1) / math.sqrt(self.N) + 1e-12
                assert abs(prod.mean() - s[i, j]) <= 4 * se_ij

    def test_two_point_beta_uniform(self):
        self._check_moments(rw.TwoPointBeta(2, 1))

    def test_two_point_beta_general(self):
        self._check_moments(rw.TwoPointBeta(5, 2))

    def test_dirichlet(self):
        self._check_moments(rw.DirichletWindow((1.0, 2.0, 0.5)))

    def test_mixture(self):
        self._check_moments(rw.FiniteMixture(((0.3, (0.6, 0.4, 0.0)), (0.7, (0.1, 0.5, 0.4)))))


def test_law_config_roundtrip(law_zoo):
    for law in law_zoo:
        again = rw.law_from_config(law.config_dict())
        assert np.allclose(rw.annealed_vector(again), rw.annealed_vector(law))
        assert np.allclose(
            rw.second_moments(again).matrix, rw.second_moments(law).matrix
        )
