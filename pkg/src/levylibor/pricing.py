"""Pricing under the terminal measure.

Monte Carlo caplet and swaption prices are single discounted expectations
under the terminal measure: the payoff seen from the terminal numeraire is
the physical payoff times the chain product ``prod (1 + delta_l L(T_i, T_l))``
over the rates between the payment date and the terminal date.  A
one-dimensional quadrature benchmark is available for caplets on the last
rate, whose drift is deterministic.  Black-76 wraps prices into implied
volatilities for like-for-like scheme comparisons.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm, norminvgauss

from .drift import DriftMethod
from .driver import nig_jump_cumulant
from .market import MarketSetup
from .simulate import (DEFAULT_BATCH, PathBundle, Scheme, SimulationEngine,
                       build_grid)

DEFAULT_MONEYNESS = (0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3)
DEFAULT_SWAPTION_PAIRS = ((2, 4), (2, 5), (2, 6), (2, 7),
                          (4, 6), (4, 7), (4, 8), (4, 9))


class CouponConvention(Enum):
    """Fixed-leg coupon at date ``T_k``: accrual-weighted ``delta_(k-1)*K``
    (market style, a one-period swaption then matches a caplet) or plain
    ``K`` per date."""

    ACCRUAL = "accrual"
    UNIT = "unit"

    @classmethod
    def parse(cls, text: str) -> "CouponConvention":
        for c in cls:
            if c.value == text:
                return c
        raise ValueError(f"unknown coupon convention {text!r}")


@dataclass(frozen=True)
class CapletSpec:
    """Caplet on rate ``maturity_index``: fixes at T_i, pays at T_(i+1).

    A zero strike is allowed and prices the discounted forward."""

    maturity_index: int
    strike: float

    def __post_init__(self) -> None:
        if self.maturity_index < 1:
            raise ValueError("maturity_index is 1-based")
        if self.strike < 0.0:
            raise ValueError("strike must be nonnegative")


@dataclass(frozen=True)
class SwaptionSpec:
    """Payer swaption: option expiry T_i, swap dates T_(i+1) .. T_m."""

    expiry_index: int
    end_index: int
    strike: float
    convention: CouponConvention = CouponConvention.ACCRUAL

    def __post_init__(self) -> None:
        if self.expiry_index < 1:
            raise ValueError("expiry_index is 1-based")
        if self.end_index <= self.expiry_index:
            raise ValueError("end_index must exceed expiry_index")
        if self.strike < 0.0:
            raise ValueError("strike must be nonnegative")


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo price with its standard error (sample std / sqrt(n))."""

    price: float
    std_error: float
    n_paths: int
    n_invalid: int
    seed: int
    scheme: Scheme


# ---------------------------------------------------------------------------
# Payoffs
# ---------------------------------------------------------------------------

def _rate_accruals(setup: MarketSetup) -> np.ndarray:
    return np.array([setup.tenor.accrual(i)
                     for i in range(1, setup.n_rates + 1)])


def _suffix_products(fixings: np.ndarray, accruals: np.ndarray) -> np.ndarray:
    """Chain products G[:, i-1, k] = prod_(l=k..N) (1 + delta_l L(T_i, T_l)).

    Shape (paths, rates, N + 2); index k runs 1..N+1 with the empty product
    at k = N+1.  Entries with k <= i-1 read below-diagonal fixings and are
    meaningless (nan)."""
    paths, n, _ = fixings.shape
    out = np.ones((paths, n, n + 2))
    for k in range(n, 0, -1):
        out[:, :, k] = out[:, :, k + 1] * (1.0 + accruals[k - 1]
                                           * fixings[:, :, k - 1])
    return out


def _caplet_payoff_batch(products: np.ndarray, fixings: np.ndarray,
                         spec: CapletSpec, setup: MarketSetup) -> np.ndarray:
    i = spec.maturity_index
    if i > setup.n_rates:
        raise IndexError(f"no rate with index {i}")
    scale = setup.tenor.accrual(i) * setup.curve.bond(setup.n_rates + 1)
    raw = np.maximum(fixings[:, i - 1, i - 1] - spec.strike, 0.0)
    return scale * products[:, i - 1, i + 1] * raw


def _swaption_payoff_batch(products: np.ndarray, spec: SwaptionSpec,
                           setup: MarketSetup) -> np.ndarray:
    i, m = spec.expiry_index, spec.end_index
    if m > setup.n_rates + 1:
        raise IndexError(f"swap end {m} beyond the terminal date index")
    row = products[:, i - 1, :]
    fixed_leg = np.zeros(row.shape[0])
    for k in range(i + 1, m + 1):
        weight = setup.tenor.accrual(k - 1) \
            if spec.convention is CouponConvention.ACCRUAL else 1.0
        fixed_leg += weight * row[:, k]
    value = row[:, i] - row[:, m] - spec.strike * fixed_leg
    return setup.curve.bond(setup.n_rates + 1) * np.maximum(value, 0.0)


def caplet_payoff(bundle: PathBundle, spec: CapletSpec,
                  setup: MarketSetup) -> float:
    """Discounted caplet payoff on one path (terminal-measure weighting)."""
    fix = bundle.fixings[None, :, :]
    products = _suffix_products(fix, _rate_accruals(setup))
    return float(_caplet_payoff_batch(products, fix, spec, setup)[0])


def swaption_payoff(bundle: PathBundle, spec: SwaptionSpec,
                    setup: MarketSetup) -> float:
    """Discounted payer-swaption payoff on one path."""
    fix = bundle.fixings[None, :, :]
    products = _suffix_products(fix, _rate_accruals(setup))
    return float(_swaption_payoff_batch(products, spec, setup)[0])


# ---------------------------------------------------------------------------
# Curve-side quantities
# ---------------------------------------------------------------------------

def zero_strike_caplet_value(setup: MarketSetup, i: int) -> float:
    """Model-free value of the zero-strike caplet: B(0,T_i) - B(0,T_(i+1))."""
    return setup.curve.bond(i) - setup.curve.bond(i + 1)


def forward_swap_rate(setup: MarketSetup, expiry_index: int, end_index: int,
                      convention: CouponConvention = CouponConvention.ACCRUAL
                      ) -> float:
    """Par rate of the forward swap over [T_i, T_m] implied by the curve."""
    i, m = expiry_index, end_index
    annuity = 0.0
    for k in range(i + 1, m + 1):
        weight = setup.tenor.accrual(k - 1) \
            if convention is CouponConvention.ACCRUAL else 1.0
        annuity += weight * setup.curve.bond(k)
    return (setup.curve.bond(i) - setup.curve.bond(m)) / annuity


# ---------------------------------------------------------------------------
# Black-76 quoting layer
# ---------------------------------------------------------------------------

class ImpliedVolError(ValueError):
    """Price not attainable inside the volatility bracket."""

    def __init__(self, message: str, price: float, bound: float,
                 side: str) -> None:
        super().__init__(message)
        self.price = price
        self.bound = bound
        self.side = side


def black76_price(forward: float, strike: float, vol: float, expiry: float,
                  discount: float = 1.0, accrual: float = 1.0) -> float:
    """Black-76 call value ``discount*accrual*(F N(d1) - K N(d2))``."""
    scale = discount * accrual
    if strike <= 0.0:
        return scale * forward
    stddev = vol * np.sqrt(expiry)
    if stddev <= 0.0:
        return scale * max(forward - strike, 0.0)
    d1 = (np.log(forward / strike) + 0.5 * stddev * stddev) / stddev
    d2 = d1 - stddev
    return scale * (forward * norm.cdf(d1) - strike * norm.cdf(d2))


def black76_implied_vol(price: float, forward: float, strike: float,
                        expiry: float, discount: float = 1.0,
                        accrual: float = 1.0, lo: float = 1e-4,
                        hi: float = 5.0, tol: float = 1e-10) -> float:
    """Invert Black-76 by bisection on the bracket [lo, hi].

    Bisects until the bracket is narrower than ``tol`` in vol units, so the
    returned vol is within ``tol`` of the root regardless of how flat the
    price is in vol.  Raises :class:`ImpliedVolError` naming the violated
    bound when the price falls below the bracket floor (at or under
    intrinsic) or above its cap.
    """
    if strike <= 0.0:
        raise ImpliedVolError("implied volatility undefined for zero strike",
                              price, 0.0, "strike")
    floor = black76_price(forward, strike, lo, expiry, discount, accrual)
    cap = black76_price(forward, strike, hi, expiry, discount, accrual)
    if price < floor:
        raise ImpliedVolError(
            f"price {price:.8g} below the bracket floor {floor:.8g} "
            f"(vol {lo:g}); at or under intrinsic value", price, floor, "lower")
    if price > cap:
        raise ImpliedVolError(
            f"price {price:.8g} above the bracket cap {cap:.8g} "
            f"(vol {hi:g})", price, cap, "upper")
    a, b = lo, hi
    for _ in range(200):
        mid = 0.5 * (a + b)
        diff = black76_price(forward, strike, mid, expiry, discount,
                             accrual) - price
        if diff == 0.0:
            return mid
        if diff > 0.0:
            b = mid
        else:
            a = mid
        if b - a <= tol:
            break
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# Quadrature benchmark for the last rate
# ---------------------------------------------------------------------------

def caplet_price_last_rate(setup: MarketSetup, strike: float) -> float:
    """Caplet price on the last rate by quadrature against the exact law.

    The last rate carries a deterministic drift (no rates after it), so its
    log at the fixing date is ``log L(0,T_N) - kappa(lam)*T_N + lam*H(T_N)``
    with ``H(T_N)`` NIG distributed; the price is a one-dimensional integral
    evaluated independently of any path machinery.  Requires a pure-jump
    driftless driver and a loading constant in time.
    """
    n = setup.n_rates
    triplet = setup.triplet
    if triplet.jumps is None or triplet.has_gauss \
            or any(v != 0.0 for v in triplet.drift.values):
        raise ValueError("benchmark needs a pure-jump driftless driver")
    levels = set(setup.vols.levels[n - 1])
    if len(levels) != 1:
        raise ValueError("benchmark needs a loading constant in time")
    lam = levels.pop()
    if lam <= 0.0:
        raise ValueError("benchmark needs a positive loading")
    p = triplet.jumps
    expiry = setup.tenor.date(n)
    forward = setup.initial_rate(n)
    scale = setup.tenor.accrual(n) * setup.curve.bond(n + 1)
    drift = -nig_jump_cumulant(lam, p) * expiry

    spread = p.delta * expiry
    law = norminvgauss(a=p.alpha * spread, b=p.beta * spread,
                       loc=p.mu * expiry, scale=spread)

    if strike <= 0.0:
        cut = -np.inf
    else:
        cut = (np.log(strike / forward) - drift) / lam

    def integrand(h: float) -> float:
        return (forward * np.exp(drift + lam * h) - strike) * law.pdf(h)

    start = cut
    anchors = [c for c in (0.0, 10.0, 50.0) if c > start]
    lowers = [start] + anchors
    uppers = anchors + [np.inf]
    total = 0.0
    for a, b in zip(lowers, uppers):
        val, _ = quad(integrand, a, b, epsabs=1e-14, epsrel=1e-11, limit=300)
        total += val
    return scale * total


# ---------------------------------------------------------------------------
# Monte Carlo pricing
# ---------------------------------------------------------------------------

@dataclass
class _Accumulator:
    total: np.ndarray
    total_sq: np.ndarray
    n_valid: int = 0
    n_invalid: int = 0


def price_instruments_mc(setup: MarketSetup,
                         caplets: Sequence[CapletSpec],
                         swaptions: Sequence[SwaptionSpec],
                         schemes: Sequence[Scheme],
                         n_paths: int, seed: int, substeps: int = 4,
                         drift_method: DriftMethod = DriftMethod.CUMULANT_EXPANSION,
                         batch_size: int = DEFAULT_BATCH, threads: int = 1
                         ) -> dict[Scheme, tuple[list[McEstimate],
                                                 list[McEstimate]]]:
    """Price many instruments under several schemes on shared increments.

    One ensemble of driver increments feeds every scheme (common random
    numbers), so cross-scheme differences carry no sampling noise from the
    driver itself.  Returns per scheme a pair of estimate lists matching
    ``caplets`` and ``swaptions``.  Invalid (overflowed) paths are excluded
    from the estimators and counted.
    """
    if n_paths < 1:
        raise ValueError("need at least one path")
    grid = build_grid(setup.tenor, substeps)
    engine = SimulationEngine(setup, grid, drift_method)
    accruals = _rate_accruals(setup)
    schemes = list(schemes)

    acc: dict[Scheme, _Accumulator] = {
        s: _Accumulator(np.zeros(len(caplets) + len(swaptions)),
                        np.zeros(len(caplets) + len(swaptions)))
        for s in schemes
    }

    def batch_stats(start: int, count: int):
        dh = engine.path_increments(seed, start, count)
        out = {}
        stage1 = None
        need_stage1 = any(s in (Scheme.FROZEN_DRIFT, Scheme.STRONG_TAYLOR)
                          for s in schemes)
        if need_stage1:
            stage1 = engine.evolve(Scheme.FROZEN_DRIFT, dh)
        for scheme in schemes:
            if scheme is Scheme.FROZEN_DRIFT:
                log_paths = stage1
            elif scheme is Scheme.STRONG_TAYLOR:
                log_paths = engine.evolve(scheme, dh, stage1=stage1)
            else:
                log_paths = engine.evolve(scheme, dh)
            fix = engine.fixings(log_paths)
            valid = engine.valid_mask(log_paths, fix)
            products = _suffix_products(fix, accruals)
            payoffs = [
                _caplet_payoff_batch(products, fix, spec, setup)[valid]
                for spec in caplets
            ] + [
                _swaption_payoff_batch(products, spec, setup)[valid]
                for spec in swaptions
            ]
            n_valid = int(valid.sum())
            sums = np.array([p.sum() for p in payoffs])
            sums_sq = np.array([(p * p).sum() for p in payoffs])
            out[scheme] = (sums, sums_sq, n_valid, count - n_valid)
        return out

    starts = [(s, min(batch_size, n_paths - s))
              for s in range(0, n_paths, batch_size)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda sc: batch_stats(*sc), starts))
    else:
        results = [batch_stats(*sc) for sc in starts]
    # Reduction happens in batch order whatever the executor did.
    for res in results:
        for scheme, (sums, sums_sq, n_valid, n_invalid) in res.items():
            a = acc[scheme]
            a.total += sums
            a.total_sq += sums_sq
            a.n_valid += n_valid
            a.n_invalid += n_invalid

    out: dict[Scheme, tuple[list[McEstimate], list[McEstimate]]] = {}
    for scheme in schemes:
        a = acc[scheme]
        estimates = []
        for j in range(len(caplets) + len(swaptions)):
            n = a.n_valid
            if n < 1:
                mean, se = float("nan"), float("inf")
            else:
                mean = a.total[j] / n
                if n == 1:
                    se = float("inf")
                else:
                    var = max(a.total_sq[j] - n * mean * mean, 0.0) / (n - 1)
                    se = float(np.sqrt(var / n))
            estimates.append(McEstimate(price=float(mean), std_error=se,
                                        n_paths=n, n_invalid=a.n_invalid,
                                        seed=seed, scheme=scheme))
        out[scheme] = (estimates[:len(caplets)], estimates[len(caplets):])
    return out


def price_caplet_mc(setup: MarketSetup, spec: CapletSpec, scheme: Scheme,
                    n_paths: int, seed: int, substeps: int = 4,
                    drift_method: DriftMethod = DriftMethod.CUMULANT_EXPANSION,
                    batch_size: int = DEFAULT_BATCH,
                    threads: int = 1) -> McEstimate:
    res = price_instruments_mc(setup, [spec], [], [scheme], n_paths, seed,
                               substeps, drift_method, batch_size, threads)
    return res[scheme][0][0]


def price_swaption_mc(setup: MarketSetup, spec: SwaptionSpec, scheme: Scheme,
                      n_paths: int, seed: int, substeps: int = 4,
                      drift_method: DriftMethod = DriftMethod.CUMULANT_EXPANSION,
                      batch_size: int = DEFAULT_BATCH,
                      threads: int = 1) -> McEstimate:
    res = price_instruments_mc(setup, [], [spec], [scheme], n_paths, seed,
                               substeps, drift_method, batch_size, threads)
    return res[scheme][1][0]


# ---------------------------------------------------------------------------
# Scheme comparison
# ---------------------------------------------------------------------------

@dataclass
class ComparisonCell:
    """One instrument-strike cell with its per-scheme estimates."""

    instrument: str
    maturity_index: int
    end_index: int | None
    strike: float
    moneyness: float
    forward: float
    expiry: float
    estimates: dict[Scheme, McEstimate] = field(default_factory=dict)
    implied_vols: dict[Scheme, float] = field(default_factory=dict)
    iv_failures: dict[Scheme, str] = field(default_factory=dict)

    @property
    def is_caplet(self) -> bool:
        return self.end_index is None

    def iv_diff(self, scheme: Scheme) -> float | None:
        if scheme in self.implied_vols and Scheme.FULL_SDE in self.implied_vols:
            return self.implied_vols[scheme] - self.implied_vols[Scheme.FULL_SDE]
        return None

    def price_diff(self, scheme: Scheme) -> float:
        return (self.estimates[scheme].price
                - self.estimates[Scheme.FULL_SDE].price)


@dataclass
class ComparisonTable:
    """All cells of one common-random-numbers comparison run."""

    cells: list[ComparisonCell]
    schemes: list[Scheme]
    n_paths: int
    seed: int
    substeps: int

    def caplet_cells(self) -> list[ComparisonCell]:
        return [c for c in self.cells if c.is_caplet]

    def swaption_cells(self) -> list[ComparisonCell]:
        return [c for c in self.cells if not c.is_caplet]

    def max_abs_iv_diff(self, scheme: Scheme,
                        cells: Iterable[ComparisonCell] | None = None
                        ) -> float:
        worst = 0.0
        for c in cells if cells is not None else self.caplet_cells():
            d = c.iv_diff(scheme)
            if d is not None:
                worst = max(worst, abs(d))
        return worst

    def write_csv(self, file) -> None:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["instrument", "maturity_index", "strike", "scheme",
                         "price", "std_error", "implied_vol",
                         "iv_diff_vs_full", "price_diff_vs_full",
                         "n_paths", "seed"])
        for cell in self.cells:
            for scheme in self.schemes:
                est = cell.estimates[scheme]
                iv = cell.implied_vols.get(scheme)
                ivd = cell.iv_diff(scheme)
                is_full = scheme is Scheme.FULL_SDE
                writer.writerow([
                    cell.instrument, cell.maturity_index,
                    f"{cell.strike:.10g}", scheme.value,
                    f"{est.price:.12g}", f"{est.std_error:.6g}",
                    "" if iv is None else f"{iv:.10g}",
                    "" if (ivd is None or is_full) else f"{ivd:.10g}",
                    "" if is_full else f"{cell.price_diff(scheme):.12g}",
                    est.n_paths, est.seed,
                ])


def write_iv_surface(table: ComparisonTable, scheme: Scheme, file) -> None:
    """Implied-vol difference surface vs the full scheme, one block per
    maturity, in a layout gnuplot's splot reads directly."""
    file.write("# caplet implied-vol difference: "
               f"{scheme.value} minus {Scheme.FULL_SDE.value}\n")
    file.write("# expiry  moneyness  iv_diff\n")
    last = None
    for cell in table.caplet_cells():
        d = cell.iv_diff(scheme)
        if d is None:
            continue
        if last is not None and cell.maturity_index != last:
            file.write("\n")
        last = cell.maturity_index
        file.write(f"{cell.expiry:.6g} {cell.moneyness:.6g} {d:.10g}\n")


def compare_schemes(setup: MarketSetup, n_paths: int, seed: int,
                    substeps: int = 4,
                    moneyness: Sequence[float] = DEFAULT_MONEYNESS,
                    swaption_pairs: Sequence[tuple[int, int]] = DEFAULT_SWAPTION_PAIRS,
                    schemes: Sequence[Scheme] = (Scheme.FULL_SDE,
                                                 Scheme.FROZEN_DRIFT,
                                                 Scheme.STRONG_TAYLOR),
                    convention: CouponConvention = CouponConvention.ACCRUAL,
                    drift_method: DriftMethod = DriftMethod.CUMULANT_EXPANSION,
                    batch_size: int = DEFAULT_BATCH,
                    threads: int = 1) -> ComparisonTable:
    """Price the caplet and swaption grids under every scheme on common
    random numbers and quote caplets as Black-76 implied vols."""
    if Scheme.FULL_SDE not in schemes:
        raise ValueError("comparisons are quoted against the full scheme")
    cells: list[ComparisonCell] = []
    caplet_specs: list[CapletSpec] = []
    swaption_specs: list[SwaptionSpec] = []
    for i in range(1, setup.n_rates + 1):
        forward = setup.initial_rate(i)
        for m in moneyness:
            strike = m * forward
            caplet_specs.append(CapletSpec(i, strike))
            cells.append(ComparisonCell(
                instrument="caplet", maturity_index=i, end_index=None,
                strike=strike, moneyness=m, forward=forward,
                expiry=setup.tenor.date(i)))
    for (i, end) in swaption_pairs:
        forward = forward_swap_rate(setup, i, end, convention)
        for m in moneyness:
            strike = m * forward
            swaption_specs.append(SwaptionSpec(i, end, strike, convention))
            cells.append(ComparisonCell(
                instrument=f"swaption_{i}_{end}", maturity_index=i,
                end_index=end, strike=strike, moneyness=m, forward=forward,
                expiry=setup.tenor.date(i)))

    results = price_instruments_mc(setup, caplet_specs, swaption_specs,
                                   schemes, n_paths, seed, substeps,
                                   drift_method, batch_size, threads)

    n_caplets = len(caplet_specs)
    for scheme in schemes:
        cap_est, swap_est = results[scheme]
        for idx, est in enumerate(cap_est):
            cells[idx].estimates[scheme] = est
        for idx, est in enumerate(swap_est):
            cells[n_caplets + idx].estimates[scheme] = est

    for cell in cells[:n_caplets]:
        i = cell.maturity_index
        discount = setup.curve.bond(i + 1)
        accrual = setup.tenor.accrual(i)
        for scheme in schemes:
            est = cell.estimates[scheme]
            try:
                cell.implied_vols[scheme] = black76_implied_vol(
                    est.price, cell.forward, cell.strike, cell.expiry,
                    discount, accrual)
            except ImpliedVolError as err:
                cell.iv_failures[scheme] = str(err)

    return ComparisonTable(cells=cells, schemes=list(schemes),
                           n_paths=n_paths, seed=seed, substeps=substeps)
