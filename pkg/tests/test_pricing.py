"""Tests for payoffs, Black-76 quoting, the quadrature oracle, and the
Monte Carlo estimators."""

import io
import math

import numpy as np
import pytest

from levylibor import (
    CapletSpec,
    CouponConvention,
    ImpliedVolError,
    PathBundle,
    Scheme,
    SwaptionSpec,
    black76_implied_vol,
    black76_price,
    build_grid,
    bundled_setup,
    caplet_price_last_rate,
    compare_schemes,
    forward_swap_rate,
    price_caplet_mc,
    price_instruments_mc,
    price_swaption_mc,
    setup_from_dict,
    setup_to_dict,
    swaption_payoff,
    zero_strike_caplet_value,
)


@pytest.fixture(scope="module")
def setup():
    return bundled_setup()


@pytest.fixture(scope="module")
def small_table(setup):
    return compare_schemes(setup, n_paths=400, seed=23, substeps=2,
                           moneyness=(0.9, 1.0, 1.1))


class TestSpecs:
    def test_caplet_spec_validation(self):
        with pytest.raises(ValueError):
            CapletSpec(0, 0.05)
        with pytest.raises(ValueError):
            CapletSpec(3, -0.01)
        CapletSpec(3, 0.0)  # zero strike is a legitimate boundary contract

    def test_swaption_spec_validation(self):
        with pytest.raises(ValueError):
            SwaptionSpec(3, 3, 0.05)
        with pytest.raises(ValueError):
            SwaptionSpec(0, 2, 0.05)
        SwaptionSpec(2, 4, 0.05, CouponConvention.UNIT)


class TestBlack76:
    def test_frozen_atm_value(self):
        assert black76_price(0.04, 0.04, 0.2, 1.0) == \
            pytest.approx(0.003186226982162317, rel=1e-14)

    def test_boundaries(self):
        assert black76_price(0.04, 0.0, 0.2, 1.0, 0.9, 0.5) == \
            0.9 * 0.5 * 0.04
        assert black76_price(0.05, 0.04, 0.0, 1.0) == pytest.approx(0.01)

    def test_round_trip_spec_example(self):
        price = black76_price(0.04, 0.04, 0.2, 1.0)
        assert black76_implied_vol(price, 0.04, 0.04, 1.0) == \
            pytest.approx(0.2, abs=1e-8)

    def test_round_trip_across_surface(self):
        for ratio in (0.7, 1.0, 1.3):
            for vol in (0.1, 0.4):
                for expiry in (0.5, 4.5):
                    price = black76_price(0.05, 0.05 * ratio, vol, expiry,
                                          0.85, 0.5)
                    back = black76_implied_vol(price, 0.05, 0.05 * ratio,
                                               expiry, 0.85, 0.5)
                    assert back == pytest.approx(vol, abs=1e-8)

    def test_atm_closed_form(self):
        # at the money d1 = -d2, so the value collapses to an erf of the
        # total standard deviation
        forward, vol, expiry = 0.048, 0.23, 2.5
        scale = 0.87 * 0.5
        expected = scale * forward * math.erf(
            vol * math.sqrt(expiry) / (2.0 * math.sqrt(2.0)))
        assert black76_price(forward, forward, vol, expiry, 0.87, 0.5) == \
            pytest.approx(expected, rel=1e-14)

    def test_implied_vol_monotone_in_price(self):
        vols = [black76_implied_vol(p, 0.05, 0.045, 2.0, 0.9, 0.5)
                for p in (0.003, 0.006, 0.012)]
        assert vols[0] < vols[1] < vols[2]

    def test_below_intrinsic_raises_lower(self):
        with pytest.raises(ImpliedVolError) as err:
            black76_implied_vol(0.0, 0.05, 0.04, 1.0)
        assert err.value.side == "lower"

    def test_above_cap_raises_upper(self):
        with pytest.raises(ImpliedVolError) as err:
            black76_implied_vol(0.2, 0.05, 0.04, 1.0)
        assert err.value.side == "upper"

    def test_zero_strike_has_no_vol(self):
        with pytest.raises(ImpliedVolError):
            black76_implied_vol(0.01, 0.05, 0.0, 1.0)


class TestQuadratureOracle:
    def test_zero_strike_reduces_to_bond_difference(self, setup):
        assert caplet_price_last_rate(setup, 0.0) == \
            pytest.approx(zero_strike_caplet_value(setup, 9), abs=1e-12)

    def test_frozen_atm_value(self, setup):
        atm = setup.initial_rate(9)
        assert caplet_price_last_rate(setup, atm) == \
            pytest.approx(0.002134278237354326, rel=1e-12)

    def test_decreasing_in_strike(self, setup):
        strikes = [0.0, 0.02, 0.04, 0.0538, 0.08]
        prices = [caplet_price_last_rate(setup, k) for k in strikes]
        assert all(a > b for a, b in zip(prices, prices[1:]))
        assert all(p > 0 for p in prices)


class TestForwardSwapRate:
    def test_single_period_equals_forward(self, setup):
        for i in (1, 5, 9):
            assert forward_swap_rate(setup, i, i + 1) == \
                pytest.approx(setup.initial_rate(i), rel=1e-12)

    def test_unit_convention_scales_annuity(self, setup):
        accrual = forward_swap_rate(setup, 2, 6, CouponConvention.ACCRUAL)
        unit = forward_swap_rate(setup, 2, 6, CouponConvention.UNIT)
        # flat half-year accruals: unit annuity is twice the accrual one
        assert unit == pytest.approx(0.5 * accrual, rel=1e-12)

    def test_zero_strike_values(self, setup):
        assert zero_strike_caplet_value(setup, 9) == \
            setup.curve.bond(9) - setup.curve.bond(10)


class TestMonteCarloEstimators:
    def test_zero_strike_caplet_matches_forward(self, setup):
        est = price_caplet_mc(setup, CapletSpec(5, 0.0), Scheme.FULL_SDE,
                              n_paths=20_000, seed=7)
        target = zero_strike_caplet_value(setup, 5)
        assert abs(est.price - target) <= 3.0 * est.std_error
        assert est.n_invalid == 0
        assert est.n_paths == 20_000

    def test_estimates_are_deterministic(self, setup):
        a = price_caplet_mc(setup, CapletSpec(3, 0.045), Scheme.FROZEN_DRIFT,
                            n_paths=2000, seed=11)
        b = price_caplet_mc(setup, CapletSpec(3, 0.045), Scheme.FROZEN_DRIFT,
                            n_paths=2000, seed=11)
        assert (a.price, a.std_error) == (b.price, b.std_error)

    def test_thread_count_does_not_change_results(self, setup):
        kwargs = dict(n_paths=4000, seed=11, substeps=2)
        one = price_caplet_mc(setup, CapletSpec(4, 0.05), Scheme.FULL_SDE,
                              threads=1, **kwargs)
        four = price_caplet_mc(setup, CapletSpec(4, 0.05), Scheme.FULL_SDE,
                               threads=4, **kwargs)
        assert one.price == four.price
        assert one.std_error == four.std_error

    def test_single_period_swaption_equals_caplet(self, setup):
        strike = setup.initial_rate(6)
        kwargs = dict(n_paths=3000, seed=13, substeps=2)
        cap = price_caplet_mc(setup, CapletSpec(6, strike),
                              Scheme.FULL_SDE, **kwargs)
        swp = price_swaption_mc(setup, SwaptionSpec(6, 7, strike),
                                Scheme.FULL_SDE, **kwargs)
        assert swp.price == pytest.approx(cap.price, rel=1e-12)
        assert swp.std_error == pytest.approx(cap.std_error, rel=1e-10)

    def test_shared_increments_across_instruments(self, setup):
        # one run pricing two instruments equals two separate runs at the
        # same seed: estimates depend only on (seed, path index)
        specs = [CapletSpec(2, 0.04), CapletSpec(7, 0.05)]
        both = price_instruments_mc(setup, specs, [], [Scheme.FULL_SDE],
                                    2000, 17, 2)
        single = price_instruments_mc(setup, [specs[1]], [],
                                      [Scheme.FULL_SDE], 2000, 17, 2)
        assert both[Scheme.FULL_SDE][0][1].price == \
            single[Scheme.FULL_SDE][0][0].price

    def test_single_path_reports_infinite_error(self, setup):
        est = price_caplet_mc(setup, CapletSpec(5, 0.0), Scheme.FULL_SDE,
                              n_paths=1, seed=3, substeps=2)
        assert math.isfinite(est.price)
        assert est.std_error == math.inf
        assert est.n_paths == 1

    def test_zero_volatility_market_prices_exactly(self, setup):
        # lambda = 0 pins every rate at its initial value, so a zero-strike
        # caplet is priced without noise and matches the bond difference
        raw = setup_to_dict(setup)
        raw["vols"] = [0.0] * 9
        quiet = setup_from_dict(raw)
        est = price_caplet_mc(quiet, CapletSpec(8, 0.0), Scheme.FULL_SDE,
                              n_paths=64, seed=3, substeps=2)
        assert est.price == pytest.approx(zero_strike_caplet_value(quiet, 8),
                                          rel=1e-12)
        # identical payoffs: anything left is one-pass accumulator rounding
        assert est.std_error < 1e-8 * est.price

    def test_zero_rate_swaption_is_worthless(self, setup):
        # all rates at zero: the floating leg pays nothing, so a payer
        # swaption has no value at any positive strike
        fix = np.zeros((9, 9))
        fix[np.tril_indices(9, k=-1)] = np.nan
        grid = build_grid(setup.tenor, 1)
        bundle = PathBundle(scheme=Scheme.FULL_SDE, grid=grid,
                            log_rates=np.full((9, 10), -np.inf),
                            fixings=fix, seed=0, path_index=0, valid=True)
        assert swaption_payoff(bundle, SwaptionSpec(2, 5, 0.05), setup) == 0.0


class TestCompareSchemes:
    def test_grid_shape(self, setup, small_table):
        caplets = small_table.caplet_cells()
        swaptions = small_table.swaption_cells()
        assert len(caplets) == 9 * 3
        assert len(swaptions) == 8 * 3
        assert all(len(c.estimates) == 3 for c in caplets)

    def test_common_random_numbers_tighten_scheme_gaps(self, small_table):
        # with shared increments the corrected scheme tracks the full one
        # orders of magnitude inside the Monte Carlo noise
        for cell in small_table.caplet_cells():
            full = cell.estimates[Scheme.FULL_SDE]
            tay = cell.estimates[Scheme.STRONG_TAYLOR]
            assert abs(tay.price - full.price) < 0.05 * full.std_error

    def test_last_maturity_cells_identical(self, small_table):
        for cell in small_table.caplet_cells():
            if cell.maturity_index == 9:
                prices = {e.price for e in cell.estimates.values()}
                assert len(prices) == 1

    def test_csv_deterministic_and_parseable(self, setup, small_table):
        buf_a, buf_b = io.StringIO(), io.StringIO()
        small_table.write_csv(buf_a)
        compare_schemes(setup, n_paths=400, seed=23, substeps=2,
                        moneyness=(0.9, 1.0, 1.1)).write_csv(buf_b)
        assert buf_a.getvalue() == buf_b.getvalue()
        header = buf_a.getvalue().splitlines()[0].split(",")
        assert header[:4] == ["instrument", "maturity_index", "strike",
                              "scheme"]

    def test_requires_full_scheme(self, setup):
        with pytest.raises(ValueError):
            compare_schemes(setup, n_paths=10, seed=1,
                            schemes=(Scheme.FROZEN_DRIFT,))

    def test_iv_failure_recorded_not_raised(self, setup):
        # at 10 paths some deep cells price under intrinsic: the failure is
        # recorded per cell and the comparison still completes
        table = compare_schemes(setup, n_paths=10, seed=1,
                                moneyness=(0.7, 1.0))
        assert any(c.iv_failures for c in table.caplet_cells())
