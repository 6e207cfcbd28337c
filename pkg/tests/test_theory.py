"""Closed-form evaluators against independent oracles and identities."""

import math

import numpy as np
import pytest
from scipy.special import jn_zeros

from bbmlab import theory
from bbmlab.theory import (
    confinement_probability_series,
    constants_for,
    displacement_tail,
    extinction_rate_lower_bound,
    interval_confinement,
    interval_confinement_many,
    lambda_d,
    ld_rate_prediction,
    lemma2_radius,
    quenched_growth_exponent,
    unit_ball_volume,
    yule_pmf,
    yule_tail,
)

# frozen oracle values (eigenexpansion cross-checked against the
# reflection form; both agree to < 1e-15 wherever both converge)
P_R1_T1 = 0.37077742979952394
P_R1_T5 = 0.00266663400169
TAIL_K1_T4 = 0.09100052384636614


class TestLambdaD:
    def test_d1_is_pi_sq_over_8(self):
        assert lambda_d(1) == pytest.approx(math.pi ** 2 / 8.0, rel=1e-12)

    def test_d3_is_pi_sq_over_2(self):
        assert lambda_d(3) == pytest.approx(math.pi ** 2 / 2.0, rel=1e-12)

    def test_even_dims_match_scipy_bessel_zeros(self):
        for d in (2, 4, 6, 8, 10):
            z = jn_zeros(d // 2 - 1, 1)[0]
            assert lambda_d(d) == pytest.approx(z * z / 2.0, rel=1e-10)

    def test_increasing_in_dim(self):
        vals = [lambda_d(d) for d in range(1, 11)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_range_error(self):
        with pytest.raises(ValueError):
            lambda_d(0)
        with pytest.raises(ValueError):
            lambda_d(11)


class TestConfinementSeries:
    def test_reference_value(self):
        v = confinement_probability_series(1.0, 1.0)
        assert not v.asymptotic
        assert v.value == pytest.approx(P_R1_T1, rel=1e-12)

    def test_short_time_limit(self):
        v = confinement_probability_series(1.0, 1e-4)
        assert v.value > 0.9999

    def test_eigen_and_images_forms_agree(self):
        for x in (0.0, 0.4, -0.85):
            for tr in (0.05, 0.2, 0.25, 0.4, 1.0):
                a = theory._interval_series(x, 1.0, tr)
                b = theory._interval_images(x, 1.0, tr)
                assert a == pytest.approx(b, abs=1e-13)

    def test_asymptotic_rate(self):
        # the raw quotient carries the log(4/pi)/t prefactor; the local
        # slope is the Dirichlet eigenvalue to machine precision
        lam = math.pi ** 2 / 8.0
        lp50 = math.log(confinement_probability_series(1.0, 50.0).value)
        lp49 = math.log(confinement_probability_series(1.0, 49.0).value)
        assert -(lp50 - lp49) == pytest.approx(lam, rel=1e-10)
        assert -lp50 / 50.0 == pytest.approx(lam - math.log(4.0 / math.pi) / 50.0, rel=1e-10)

    def test_higher_dim_is_marked_asymptotic(self):
        v = confinement_probability_series(2.0, 3.0, dim=3)
        assert v.asymptotic
        assert v.value == pytest.approx(math.exp(-lambda_d(3) * 3.0 / 4.0), rel=1e-12)

    def test_log_form_handles_deep_decay(self):
        lv = theory.log_confinement_probability(1.0, 5000.0)
        assert lv.value == pytest.approx(
            math.log(4.0 / math.pi) - math.pi ** 2 / 8.0 * 5000.0, rel=1e-12
        )

    def test_offcenter_series_vectorized(self):
        xs = np.array([-0.8, -0.1, 0.0, 0.55])
        many = interval_confinement_many(xs, 1.0, 2.0)
        one = [interval_confinement(float(x), 1.0, 2.0) for x in xs]
        assert np.allclose(many, one, rtol=1e-13)
        assert interval_confinement(1.0, 1.0, 0.5) == 0.0


class TestDisplacementTail:
    def test_reference_value(self):
        v = displacement_tail(1.0, 4.0)
        assert not v.asymptotic
        assert v.value == pytest.approx(TAIL_K1_T4, rel=1e-12)
        p = confinement_probability_series(4.0, 4.0).value
        assert v.value == pytest.approx(1.0 - p, rel=1e-12)

    def test_vanishes_for_large_k(self):
        vals = [displacement_tail(k, 2.0).value for k in (1.0, 2.0, 3.0, 5.0)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-8

    def test_exponent_approaches_half_k_squared(self):
        # pointwise quotient at t=4 is still ~20% high; the fitted slope
        # over a ladder is within 10% of k^2/2 (frozen derived values)
        q4 = -math.log(displacement_tail(1.0, 4.0).value) / 4.0
        assert q4 == pytest.approx(0.59922, rel=1e-3)
        ts = np.array([4.0, 9.0, 16.0, 25.0])
        ys = np.array([-math.log(displacement_tail(1.0, t).value) for t in ts])
        slope = np.linalg.lstsq(np.vstack([ts, np.ones_like(ts)]).T, ys, rcond=None)[0][0]
        assert abs(slope - 0.5) / 0.5 < 0.10
        quotients = ys / ts
        assert all(b < a for a, b in zip(quotients, quotients[1:]))

    def test_higher_dim_marked(self):
        v = displacement_tail(1.5, 2.0, dim=4)
        assert v.asymptotic
        assert v.value == pytest.approx(math.exp(-1.5 ** 2 * 2.0 / 2.0), rel=1e-12)


class TestYule:
    def test_pmf_value(self):
        assert yule_pmf(math.log(2.0), 1.0, 3) == pytest.approx(0.125, rel=1e-12)

    def test_tail_telescopes(self):
        for k in range(1, 30):
            lhs = yule_tail(1.3, 0.7, k) - yule_tail(1.3, 0.7, k + 1)
            assert lhs == pytest.approx(yule_pmf(1.3, 0.7, k + 1), rel=1e-10)

    def test_normalization(self):
        total = sum(yule_pmf(1.0, 1.0, k) for k in range(1, 201))
        assert abs(total - 1.0) < 1e-12

    def test_domain_error(self):
        with pytest.raises(ValueError):
            yule_pmf(1.0, 1.0, 0)


class TestLDRatePrediction:
    def test_exact_regime(self):
        p = ld_rate_prediction(0.5, 2.0)
        assert p.regime == "exact" and p.value == pytest.approx(-0.5)

    def test_band_regime(self):
        p = ld_rate_prediction(3.0, 2.0)
        assert p.regime == "band"
        assert p.band == pytest.approx((-2.0, -1.0))

    def test_boundary_included_in_exact(self):
        p = ld_rate_prediction(1.0, 2.0)
        assert p.regime == "exact" and p.value == pytest.approx(-1.0)

    def test_continuity_at_boundary(self):
        b = math.sqrt(2.0 / 2.0)
        exact = ld_rate_prediction(b, 2.0)
        band = ld_rate_prediction(b + 1e-9, 2.0)
        assert exact.value == pytest.approx(band.band[1], abs=1e-8)

    def test_deep_kappa_band_saturates_at_extinction_rate(self):
        p = ld_rate_prediction(5.0, 2.0)
        e = extinction_rate_lower_bound(2.0)
        assert p.band[0] == pytest.approx(-e.rate)


class TestExtinctionBound:
    def test_reference_values(self):
        b = extinction_rate_lower_bound(2.0)
        assert b.rate == pytest.approx(2.0) and b.k_opt == pytest.approx(0.5)
        b2 = extinction_rate_lower_bound(0.5)
        assert b2.rate == pytest.approx(1.0) and b2.k_opt == pytest.approx(1.0)

    def test_strategy_cost_minimized_at_k_opt(self):
        beta = 1.7
        b = extinction_rate_lower_bound(beta)
        cost = lambda k: beta * k + 1.0 / (2.0 * k)
        assert cost(b.k_opt) < cost(b.k_opt * 1.1)
        assert cost(b.k_opt) < cost(b.k_opt * 0.9)
        assert cost(b.k_opt) == pytest.approx(b.rate)


class TestGrowthExponent:
    def test_reference_value(self):
        g = quenched_growth_exponent(1, 1.0, 6.0, math.exp(4.0))
        assert g.exponent == pytest.approx(6.0 - (math.pi ** 2 / 2.0) / 16.0, rel=1e-12)
        assert g.limit_value == pytest.approx(-math.pi ** 2 / 2.0, rel=1e-12)

    def test_in_trap_rate_never_enters(self):
        import inspect

        assert "beta_bar" not in inspect.signature(quenched_growth_exponent).parameters

    def test_monotone_to_beta(self):
        vals = [quenched_growth_exponent(2, 1.0, 3.0, t).exponent for t in (5, 50, 500, 5000)]
        assert all(b > a for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 3.0

    def test_requires_t_above_e(self):
        with pytest.raises(ValueError):
            quenched_growth_exponent(1, 1.0, 1.0, 2.0)


class TestLemma2Radius:
    def test_reference_value(self):
        assert lemma2_radius(1, 1.0, math.exp(6.0)) == pytest.approx(1.0 / 6.0, rel=1e-12)

    def test_monotone_in_t(self):
        vals = [lemma2_radius(2, 1.0, t) for t in (10.0, 100.0, 1000.0)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_intensity_scaling(self):
        for d in (1, 2, 3):
            ratio = lemma2_radius(d, 2.0, 100.0) / lemma2_radius(d, 1.0, 100.0)
            assert ratio == pytest.approx(2.0 ** (-1.0 / d), rel=1e-12)


class TestConstants:
    def test_eigenvalue_identity(self):
        for d in range(1, 11):
            for nu in (0.25, 1.0, 3.0):
                c = constants_for(d, nu)
                assert c.c_d_nu * c.r0 ** 2 == pytest.approx(c.lambda_d, rel=1e-14)
                assert c.r0 ** d * nu * c.omega_d == pytest.approx(d, rel=1e-14)

    def test_unit_ball_volumes(self):
        assert unit_ball_volume(1) == pytest.approx(2.0)
        assert unit_ball_volume(2) == pytest.approx(math.pi)
        assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)
