"""Tests for the jump-driver layer: cumulants, densities, samplers."""

import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import ks_2samp

from levylibor import (
    CumulantDomainError,
    LevyTriplet,
    NigParams,
    PiecewiseConstant,
    nig_cumulant,
    nig_jump_cumulant,
    nig_levy_density,
    nig_mean_rate,
    nig_variance_rate,
    path_rng,
    sample_inverse_gaussian,
    sample_nig_increment,
    simulate_driver_increments,
)
from levylibor.driver import ExponentialMomentBound, validate_exponential_moments

BENCH = NigParams(alpha=1.5, beta=0.0, delta=1.5, mu=0.0)


class TestCumulant:
    def test_symmetric_case_closed_form(self):
        # beta = mu = 0: kappa(u) = delta*(alpha - sqrt(alpha^2 - u^2))
        assert nig_cumulant(1.5, BENCH) == 2.25
        assert nig_cumulant(0.0, BENCH) == 0.0

    def test_frozen_value_small_argument(self):
        assert nig_cumulant(0.12, BENCH) == 0.00721155701211984

    def test_value_at_summed_loading_is_exact_rationally(self):
        # With alpha = delta = 3/2 and u = 36/25 the radicand is (21/50)^2,
        # so the cumulant is exactly 81/50 = 1.62 in rational arithmetic.
        alpha = Fraction(3, 2)
        u = Fraction(36, 25)
        root = Fraction(21, 50)
        assert root * root == alpha * alpha - u * u
        assert Fraction(3, 2) * (alpha - root) == Fraction(81, 50)
        # float evaluation rounds each intermediate, landing within 2 ulp
        assert abs(nig_cumulant(1.44, BENCH) - 1.62) <= 2 * np.spacing(1.62)

    def test_domain_is_closed_and_violations_raise(self):
        nig_cumulant(1.5, BENCH)
        nig_cumulant(-1.5, BENCH)
        with pytest.raises(CumulantDomainError) as err:
            nig_cumulant(1.5 + 1e-9, BENCH)
        assert "1.5000000" in str(err.value)
        with pytest.raises(CumulantDomainError):
            nig_cumulant(-1.6, BENCH)

    def test_skewed_parameters_match_direct_formula(self):
        p = NigParams(alpha=2.0, beta=0.4, delta=0.8, mu=0.1)
        u = 0.9
        gamma = math.sqrt(p.alpha ** 2 - p.beta ** 2)
        direct = p.mu * u + p.delta * (
            gamma - math.sqrt(p.alpha ** 2 - (p.beta + u) ** 2))
        assert nig_cumulant(u, p) == pytest.approx(direct, rel=1e-15)

    def test_jump_cumulant_is_mu_free_and_compensated(self):
        p1 = NigParams(alpha=2.0, beta=0.4, delta=0.8, mu=0.1)
        p2 = NigParams(alpha=2.0, beta=0.4, delta=0.8, mu=-3.0)
        assert nig_jump_cumulant(0.7, p1) == nig_jump_cumulant(0.7, p2)
        # symmetric driftless case: jump cumulant equals the full cumulant
        assert nig_jump_cumulant(0.7, BENCH) == nig_cumulant(0.7, BENCH)

    def test_mean_rate(self):
        assert nig_mean_rate(BENCH) == 0.0
        p = NigParams(alpha=2.0, beta=0.4, delta=0.8, mu=0.1)
        gamma = math.sqrt(4.0 - 0.16)
        assert nig_mean_rate(p) == pytest.approx(0.1 + 0.8 * 0.4 / gamma,
                                                 rel=1e-15)


class TestLevyDensity:
    def test_symmetric_when_beta_zero(self):
        for x in (0.05, 0.3, 1.7):
            assert nig_levy_density(x, BENCH) == nig_levy_density(-x, BENCH)

    def test_positive_and_decaying(self):
        xs = np.array([0.1, 0.5, 1.0, 3.0, 8.0])
        vals = np.array([nig_levy_density(x, BENCH) for x in xs])
        assert np.all(vals > 0)
        assert np.all(np.diff(vals) < 0)

    def test_second_moment_matches_variance_rate(self):
        # independent moment identity: integral of x^2 against the density
        # equals the variance per unit time (the process has no Gaussian
        # part), tying the Bessel-form density to the cumulant derivatives
        half = quad(lambda x: x * x * nig_levy_density(x, BENCH),
                    0.0, 1.0, limit=200)[0]
        half += quad(lambda x: x * x * nig_levy_density(x, BENCH),
                     1.0, np.inf, limit=200)[0]
        assert 2.0 * half == pytest.approx(nig_variance_rate(BENCH), rel=1e-9)
        assert nig_variance_rate(BENCH) == 1.0


class TestSamplers:
    def test_inverse_gaussian_moments(self):
        rng = np.random.default_rng(12345)
        z = sample_inverse_gaussian(1.0, 2.0, rng, size=1_000_000)
        assert np.all(z > 0)
        # IG(mean, shape): var = mean^3 / shape
        assert z.mean() == pytest.approx(1.0, rel=5e-3)
        assert z.var() == pytest.approx(0.5, rel=2e-2)

    def test_nig_increment_moments(self):
        rng = np.random.default_rng(12345)
        x = sample_nig_increment(0.5, BENCH, rng, size=1_000_000)
        se = x.std() / 1000.0
        assert abs(x.mean()) <= 4.0 * se
        # var over dt = variance rate
        assert x.var() == pytest.approx(0.5, rel=2e-2)

    def test_moment_generating_function(self):
        # E[exp(u H_1)] = exp(kappa(u)); checked at a pinned seed within
        # four standard errors of the empirical mean
        rng = np.random.default_rng(12345)
        x = sample_nig_increment(1.0, BENCH, rng, size=1_000_000)
        for u in (0.5, 1.0):
            g = np.exp(u * x)
            dev = g.mean() - math.exp(nig_cumulant(u, BENCH))
            assert abs(dev) <= 4.0 * g.std(ddof=1) / 1000.0

    def test_increments_add_in_law(self):
        # sum of two quarter-period draws matches one half-period draw;
        # two-sample Kolmogorov-Smirnov at the 1% level, pinned seed
        rng = np.random.default_rng(777)
        a = (sample_nig_increment(0.25, BENCH, rng, size=100_000)
             + sample_nig_increment(0.25, BENCH, rng, size=100_000))
        b = sample_nig_increment(0.5, BENCH, rng, size=100_000)
        assert ks_2samp(a, b).pvalue > 0.01

    def test_path_rng_substreams(self):
        a1 = path_rng(42, 7).standard_normal(8)
        a2 = path_rng(42, 7).standard_normal(8)
        b = path_rng(42, 8).standard_normal(8)
        c = path_rng(43, 7).standard_normal(8)
        assert np.array_equal(a1, a2)
        assert not np.array_equal(a1, b)
        assert not np.array_equal(a1, c)

    def test_symmetric_increments_have_vanishing_skewness(self):
        rng = np.random.default_rng(4242)
        x = sample_nig_increment(0.5, BENCH, rng, size=1_000_000)
        m = x.mean()
        s2 = ((x - m) ** 2).mean()
        skew = ((x - m) ** 3).mean() / s2 ** 1.5
        assert abs(skew) < 0.05

    def test_inverse_gaussian_concentrates_at_large_shape(self):
        # var = mean^3 / shape, so a huge shape pins the draws to the mean
        rng = np.random.default_rng(99)
        z = sample_inverse_gaussian(1.0, 1e12, rng, size=100_000)
        assert z.var() < 1e-9
        assert abs(z.mean() - 1.0) < 1e-6


class TestPiecewiseConstant:
    def test_lookup_and_bounds(self):
        f = PiecewiseConstant(values=(1.0, 2.0, -3.0), breaks=(1.0, 2.0))
        assert f(0.0) == 1.0
        assert f(0.99) == 1.0
        assert f(1.0) == 2.0  # right-continuous at breakpoints
        assert f(5.0) == -3.0
        assert f.max_abs == 3.0

    def test_constant_constructor(self):
        f = PiecewiseConstant.constant(0.7)
        assert f(0.0) == f(123.4) == 0.7

    def test_bad_breaks_raise(self):
        with pytest.raises(ValueError):
            PiecewiseConstant(values=(1.0, 2.0, 3.0), breaks=(1.0, 1.0))
        with pytest.raises(ValueError):
            PiecewiseConstant(values=(1.0,), breaks=(0.0, 1.0))


class TestDriverIncrements:
    def _triplet(self):
        return LevyTriplet.pure_jump(BENCH)

    def test_shapes_and_moments(self):
        class Grid:
            times = np.linspace(0.0, 2.0, 9)
        rng = np.random.default_rng(5)
        inc = simulate_driver_increments(Grid(), self._triplet(), rng)
        assert inc.jump.shape == (8,)
        assert inc.gauss is None
        assert inc.dh.shape == (8,)

    def test_cumulant_time_dependence(self):
        t = self._triplet()
        assert t.cumulant(0.12, 0.0) == nig_cumulant(0.12, BENCH)
        assert t.jump_cumulant(0.12) == nig_jump_cumulant(0.12, BENCH)
        assert t.mean_rate(0.3) == 0.0

    def test_variance_over_full_horizon(self):
        # summed increments over [0, 4.5] carry variance rate * horizon
        class Grid:
            times = np.linspace(0.0, 4.5, 37)
        triplet = self._triplet()
        totals = np.array([
            simulate_driver_increments(Grid(), triplet,
                                       path_rng(314, j)).dh.sum()
            for j in range(4000)
        ])
        horizon = 4.5 * nig_variance_rate(BENCH)
        assert totals.var() == pytest.approx(horizon, rel=0.15)
        assert abs(totals.mean()) < 4.0 * np.sqrt(horizon / 4000)


class TestExponentialMomentValidation:
    def test_passes_with_slack(self):
        rep = validate_exponential_moments(
            (0.2, 0.19, 0.12), ExponentialMomentBound(0.6, 0.05), BENCH)
        assert rep.passed
        assert rep.vol_sum == pytest.approx(0.51)

    def test_boundary_is_closed(self):
        # slack zero and (1+0)*M equal to the domain half-width still passes
        rep = validate_exponential_moments(
            (1.5,), ExponentialMomentBound(1.5, 0.0), BENCH)
        assert rep.domain_ok and rep.passed

    def test_zero_volatilities_always_pass(self):
        rep = validate_exponential_moments(
            (0.0,) * 9, ExponentialMomentBound(1.45, 0.03), BENCH)
        assert rep.passed

    def test_sum_violation_fails(self):
        rep = validate_exponential_moments(
            (1.0, 0.6), ExponentialMomentBound(1.45, 0.03), BENCH)
        assert not rep.sum_ok and not rep.passed

    def test_domain_violation_fails(self):
        rep = validate_exponential_moments(
            (0.5,), ExponentialMomentBound(1.49, 0.02), BENCH)
        assert rep.sum_ok and not rep.domain_ok and not rep.passed
        assert any("domain" in line for line in rep.lines())
