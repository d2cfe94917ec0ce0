"""Market inputs: tenor grid, discount curve, volatility loadings.

A :class:`MarketSetup` bundles everything the simulator consumes: the tenor
structure ``T_0 < T_1 < ... < T_(N+1)`` with the terminal date last, the
initial discount curve, one volatility loading per forward rate and the
driving process characteristics.  Rates are indexed 1..N throughout the
public interface; rate ``i`` fixes at ``T_i`` and accrues over
``[T_i, T_(i+1)]``.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from .driver import (
    ExponentialMomentBound,
    ExponentialMomentReport,
    LevyTriplet,
    NigParams,
    validate_exponential_moments,
)

BUNDLED_SETUP = "paper_feb2002"


class CurveOrderError(ValueError):
    """Discount curve violates positivity or strict monotonicity."""


@dataclass(frozen=True)
class TenorStructure:
    """Increasing payment dates ``T_0 < ... < T_(N+1)``; N forward rates."""

    dates: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.dates) < 3:
            raise ValueError("need at least three tenor dates (one rate)")
        if self.dates[0] < 0.0:
            raise ValueError("first tenor date must be nonnegative")
        if any(x >= y for x, y in zip(self.dates, self.dates[1:])):
            raise ValueError("tenor dates must be strictly increasing")

    @classmethod
    def regular(cls, n_rates: int, spacing: float = 0.5,
                start: float = 0.0) -> "TenorStructure":
        """Evenly spaced structure with ``n_rates`` forward rates."""
        dates = tuple(start + spacing * k for k in range(n_rates + 2))
        return cls(dates)

    @property
    def n_rates(self) -> int:
        return len(self.dates) - 2

    @property
    def terminal(self) -> float:
        """The terminal date ``T_(N+1)``, numeraire maturity."""
        return self.dates[-1]

    def date(self, k: int) -> float:
        """``T_k`` for ``k`` in 0..N+1."""
        return self.dates[k]

    def accrual(self, k: int) -> float:
        """``delta_k = T_(k+1) - T_k`` for ``k`` in 0..N."""
        return self.dates[k + 1] - self.dates[k]

    @property
    def accruals(self) -> np.ndarray:
        out = np.diff(np.asarray(self.dates))
        out.setflags(write=False)
        return out


@dataclass(frozen=True)
class DiscountCurve:
    """Initial bond prices ``B(0, T_k)`` for ``k`` in 1..N+1; B(0, T_0) = 1 is
    implied only when ``T_0 = 0``."""

    bonds: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.bonds) < 2:
            raise ValueError("need at least two bond prices")

    def bond(self, k: int) -> float:
        """``B(0, T_k)`` for ``k`` in 1..N+1."""
        if k < 1:
            raise IndexError("bond prices are quoted for k >= 1")
        return self.bonds[k - 1]


@dataclass(frozen=True)
class VolatilityStructure:
    """Piecewise-constant loading per rate: ``levels[i-1][j]`` applies to rate
    ``i`` on ``[T_j, T_(j+1))`` for ``j < i``; the loading is zero past the
    fixing date ``T_i``."""

    tenor: TenorStructure
    levels: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if len(self.levels) != self.tenor.n_rates:
            raise ValueError("need one loading per rate")
        for i, lv in enumerate(self.levels, start=1):
            if len(lv) != i:
                raise ValueError(
                    f"rate {i} needs {i} interval levels (one per accrual "
                    f"interval before its fixing), got {len(lv)}"
                )

    @classmethod
    def flat_per_rate(cls, tenor: TenorStructure,
                      levels: Sequence[float]) -> "VolatilityStructure":
        """Loadings constant in time, one number per rate."""
        if len(levels) != tenor.n_rates:
            raise ValueError("need one level per rate")
        return cls(tenor, tuple(tuple([float(v)] * i)
                                for i, v in enumerate(levels, start=1)))

    def vol_at(self, s: float, i: int) -> float:
        """Loading of rate ``i`` at time ``s``; zero past the fixing ``T_i``."""
        if not 1 <= i <= self.tenor.n_rates:
            raise IndexError(f"rate index {i} outside 1..{self.tenor.n_rates}")
        if s < 0.0 or s > self.tenor.date(i):
            return 0.0
        j = bisect.bisect_right(self.tenor.dates, s) - 1
        return self.levels[i - 1][min(j, i - 1)]

    def sup_abs(self, i: int) -> float:
        """Sup over time of the absolute loading of rate ``i``."""
        return max(abs(v) for v in self.levels[i - 1])

    @property
    def per_rate_sup(self) -> tuple[float, ...]:
        return tuple(self.sup_abs(i) for i in range(1, self.tenor.n_rates + 1))


def initial_libor(curve: DiscountCurve, tenor: TenorStructure) -> np.ndarray:
    """Initial forward rates bootstrapped from the curve.

    ``L(0, T_i) = (B(0, T_i)/B(0, T_(i+1)) - 1)/delta_i`` for ``i`` in 1..N.

    Raises
    ------
    CurveOrderError
        Naming the first offending maturity pair if any bond is nonpositive
        or any ratio fails ``B(0, T_i) > B(0, T_(i+1))``.
    """
    n = tenor.n_rates
    if len(curve.bonds) != n + 1:
        raise ValueError("curve must quote bonds for T_1 .. T_(N+1)")
    for k in range(1, n + 2):
        if curve.bond(k) <= 0.0:
            raise CurveOrderError(f"bond price B(0, T_{k}) = {curve.bond(k)} "
                                  "is not positive")
    for i in range(1, n + 1):
        if curve.bond(i) <= curve.bond(i + 1):
            raise CurveOrderError(
                f"bond prices must decrease strictly: B(0, T_{i}) = "
                f"{curve.bond(i)} <= B(0, T_{i + 1}) = {curve.bond(i + 1)}"
            )
    out = np.array([(curve.bond(i) / curve.bond(i + 1) - 1.0) / tenor.accrual(i)
                    for i in range(1, n + 1)])
    out.setflags(write=False)
    return out


def _initial_libor_lenient(curve: DiscountCurve,
                           tenor: TenorStructure) -> np.ndarray:
    """Same bootstrap without economic checks; bad curves yield rates <= 0."""
    return np.array([(curve.bond(i) / curve.bond(i + 1) - 1.0)
                     / tenor.accrual(i) for i in range(1, tenor.n_rates + 1)])


@dataclass(frozen=True)
class MarketSetup:
    """Immutable bundle of market data and driver characteristics.

    Construction only enforces structural consistency (lengths, index
    ranges); economic conditions are the business of :func:`validate_setup`,
    which reports rather than throws, so malformed markets can be loaded and
    diagnosed.
    """

    tenor: TenorStructure
    curve: DiscountCurve
    vols: VolatilityStructure
    triplet: LevyTriplet
    em: ExponentialMomentBound
    name: str = ""
    initial_rates: np.ndarray = field(init=False, repr=False, compare=False)
    log_initial_rates: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.curve.bonds) != self.tenor.n_rates + 1:
            raise ValueError("curve length does not match tenor structure")
        if self.vols.tenor.dates != self.tenor.dates:
            raise ValueError("volatility structure built on a different tenor")
        rates = _initial_libor_lenient(self.curve, self.tenor)
        with np.errstate(invalid="ignore", divide="ignore"):
            logs = np.log(rates)
        rates.setflags(write=False)
        logs.setflags(write=False)
        object.__setattr__(self, "initial_rates", rates)
        object.__setattr__(self, "log_initial_rates", logs)

    @property
    def n_rates(self) -> int:
        return self.tenor.n_rates

    def initial_rate(self, i: int) -> float:
        """``L(0, T_i)`` for ``i`` in 1..N."""
        return float(self.initial_rates[i - 1])


@dataclass(frozen=True)
class ValidationItem:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class SetupValidationReport:
    """Per-condition outcome of market validation; machine readable."""

    items: tuple[ValidationItem, ...]
    em_report: ExponentialMomentReport

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def item(self, name: str) -> ValidationItem:
        for it in self.items:
            if it.name == name:
                return it
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = []
        for item in self.items:
            tag = "ok" if item.passed else "FAIL"
            out.append(f"[{tag}] {item.name}: {item.detail}")
        return out

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "items": [{"name": i.name, "passed": i.passed, "detail": i.detail}
                      for i in self.items],
        }


def validate_setup(setup: MarketSetup) -> SetupValidationReport:
    """Run every economic admissibility check; never throws on bad data."""
    items = []

    bonds = [setup.curve.bond(k) for k in range(1, setup.n_rates + 2)]
    positive = all(b > 0.0 for b in bonds)
    decreasing = all(x > y for x, y in zip(bonds, bonds[1:]))
    if positive and decreasing:
        detail = "bond prices positive and strictly decreasing"
    elif not positive:
        k = 1 + next(j for j, b in enumerate(bonds) if b <= 0.0)
        detail = f"bond price B(0, T_{k}) = {bonds[k - 1]} is not positive"
    else:
        k = 1 + next(j for j in range(len(bonds) - 1)
                     if bonds[j] <= bonds[j + 1])
        detail = (f"B(0, T_{k}) = {bonds[k - 1]} <= "
                  f"B(0, T_{k + 1}) = {bonds[k]}")
    items.append(ValidationItem("curve_order", positive and decreasing, detail))

    rates_ok = bool(np.all(setup.initial_rates > 0.0))
    lo = float(np.min(setup.initial_rates))
    hi = float(np.max(setup.initial_rates))
    items.append(ValidationItem(
        "initial_rates_positive", rates_ok,
        f"initial forward rates in [{lo:.6g}, {hi:.6g}]"))

    if setup.triplet.jumps is None:
        # A continuous driver has every exponential moment; only the sum
        # condition carries information.
        vol_sum = float(np.sum(np.abs(setup.vols.per_rate_sup)))
        em = ExponentialMomentReport(
            vol_sum=vol_sum, bound=setup.em.bound,
            required=(1.0 + setup.em.slack) * setup.em.bound,
            domain_halfwidth=float("inf"),
            sum_ok=vol_sum <= setup.em.bound, domain_ok=True)
    else:
        em = validate_exponential_moments(
            setup.vols.per_rate_sup, setup.em, setup.triplet.jumps)
    items.append(ValidationItem(
        "volatility_sum", em.sum_ok,
        f"summed loadings {em.vol_sum:.6g} vs bound {em.bound:.6g}"))
    items.append(ValidationItem(
        "moment_domain", em.domain_ok,
        f"required range {em.required:.6g} vs domain halfwidth "
        f"{em.domain_halfwidth:.6g}"))

    drift_zero = all(v == 0.0 for v in setup.triplet.drift.values)
    mean = 0.0 if setup.triplet.jumps is None else abs(
        setup.triplet.mean_rate(0.0))
    driftless = drift_zero and mean <= 1e-12
    items.append(ValidationItem(
        "driver_driftless", driftless,
        "driver has zero mean rate" if driftless else
        f"driver mean rate {setup.triplet.mean_rate(0.0):.6g} != 0; the "
        "terminal-measure construction needs a driftless driver"))

    return SetupValidationReport(items=tuple(items), em_report=em)


# ---------------------------------------------------------------------------
# Setup files
# ---------------------------------------------------------------------------

def setup_from_dict(raw: dict, name: str = "") -> MarketSetup:
    """Build a setup from the documented mapping layout.

    Required keys: ``tenor_dates`` (T_0..T_(N+1)), ``bond_prices`` (T_1..
    T_(N+1)), ``vols`` (per rate: a number, or one number per accrual
    interval before the fixing), ``nig`` (``alpha``, ``beta``, ``delta_bar``,
    ``mu``) and ``em`` (``M``, ``epsilon``).
    """
    tenor = TenorStructure(tuple(float(t) for t in raw["tenor_dates"]))
    curve = DiscountCurve(tuple(float(b) for b in raw["bond_prices"]))
    spec = raw["vols"]
    levels = []
    for i, entry in enumerate(spec, start=1):
        if isinstance(entry, (int, float)):
            levels.append(tuple([float(entry)] * i))
        else:
            levels.append(tuple(float(v) for v in entry))
    vols = VolatilityStructure(tenor, tuple(levels))
    nig = raw["nig"]
    params = NigParams(alpha=float(nig["alpha"]), beta=float(nig.get("beta", 0.0)),
                       delta=float(nig["delta_bar"]), mu=float(nig.get("mu", 0.0)))
    em_raw = raw["em"]
    em = ExponentialMomentBound(bound=float(em_raw["M"]),
                                slack=float(em_raw.get("epsilon", 0.0)))
    return MarketSetup(tenor=tenor, curve=curve, vols=vols,
                       triplet=LevyTriplet.pure_jump(params), em=em,
                       name=name or str(raw.get("name", "")))


def setup_to_dict(setup: MarketSetup) -> dict:
    p = setup.triplet.jumps
    if p is None:
        raise ValueError("only pure-jump NIG setups have a file form")
    return {
        "name": setup.name,
        "tenor_dates": list(setup.tenor.dates),
        "bond_prices": list(setup.curve.bonds),
        "vols": [list(lv) for lv in setup.vols.levels],
        "nig": {"alpha": p.alpha, "beta": p.beta, "delta_bar": p.delta,
                "mu": p.mu},
        "em": {"M": setup.em.bound, "epsilon": setup.em.slack},
    }


def load_setup(path: str) -> MarketSetup:
    """Read a market setup from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return setup_from_dict(raw)


def bundled_setup(name: str = BUNDLED_SETUP) -> MarketSetup:
    """Load one of the setups shipped with the package."""
    ref = resources.files(__package__).joinpath(f"data/{name}.json")
    with ref.open("r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return setup_from_dict(raw, name=name)
