"""Terminal-measure drift of the log forward rates.

Under the terminal measure the log of rate ``i`` carries the state-dependent
drift rate

    b(s, T_i; z) = -c(s)*lam_i^2/2 - c(s)*lam_i*sum_(l>i) u_l*lam_l - J,

    J = int ( (e^(lam_i x) - 1) * prod_(l>i) [u_l*(e^(lam_l x) - 1) + 1]
              - lam_i x ) F_s(dx),

where ``u_l = delta_l e^(z_l) / (1 + delta_l e^(z_l))`` links rate ``l`` to
the chain of forward measures.  Expanding the product turns ``J`` into a
weighted sum of compensated jump cumulants evaluated at subset sums of the
loadings:

    J = kappa(lam_i) + sum_(non-empty S)  (prod_(l in S) u_l)
            * sum_(R subset of S+{i}) (-1)^(|S|+1-|R|) kappa(Lam_R),

with ``Lam_R`` the sum of loadings over ``R``.  The inner sums do not depend
on the state, so they are precomputed once per loading pattern; evaluating
the drift then costs one subset-product transform and a dot product per
rate.  An adaptive-quadrature route integrates the same integrand directly
against the Levy density and serves as the independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import quad

from .driver import nig_jump_cumulant, nig_levy_density
from .market import MarketSetup


class DriftMethod(Enum):
    CUMULANT_EXPANSION = "cumulant"
    QUADRATURE = "quadrature"

    @classmethod
    def parse(cls, text: str) -> "DriftMethod":
        for m in cls:
            if m.value == text:
                return m
        raise ValueError(f"unknown drift method {text!r}; "
                         f"choose from {[m.value for m in cls]}")


@dataclass(frozen=True)
class StateVector:
    """Log forward rates entering the drift, with their provenance.

    ``kind`` is ``"log_rate"`` for exact simulated states and ``"proxy"``
    for deterministic-drift stage-one values substituted in their place;
    the drift treats both identically, the flag documents which
    approximation a caller is running.
    """

    values: np.ndarray
    kind: str = "log_rate"

    def __post_init__(self) -> None:
        if self.kind not in ("log_rate", "proxy"):
            raise ValueError(f"unknown state kind {self.kind!r}")
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)


def link_weight(z, accrual: float):
    """Measure-link weight ``delta*L/(1 + delta*L)`` for ``L = e^z``.

    Computed as ``delta/(delta + e^(-z))`` so the limits come out exact:
    0 when ``z = -inf`` (the rate has collapsed) and 1 as ``z -> +inf``.
    """
    za = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        out = accrual / (accrual + np.exp(-za))
    return float(out) if za.ndim == 0 else out


def jump_factor(weight, vol: float, x):
    """Per-jump factor ``u*(e^(vol*x) - 1) + 1`` tying one rate into the
    terminal-measure compensator."""
    return 1.0 + np.asarray(weight) * np.expm1(vol * np.asarray(x))


# ---------------------------------------------------------------------------
# Cumulant-expansion route
# ---------------------------------------------------------------------------

def _subset_coefficients(lam_i: float, lams_after: tuple[float, ...],
                         setup: MarketSetup) -> np.ndarray:
    """State-independent inner sums of the expansion, one per subset.

    ``lams_after`` lists the loadings of the rates later in the tenor in the
    order the subset-product transform absorbs them; bit ``r`` of a subset
    index addresses ``lams_after[r]``.  Entry 0 (the empty subset) carries
    the lone ``kappa(lam_i)`` term.
    """
    jumps = setup.triplet.jumps
    elems = (lam_i,) + tuple(lams_after)
    # Subset sums over (i, after...) by doubling; bit 0 is rate i itself.
    sums = np.zeros(1)
    for lam in elems:
        sums = np.concatenate([sums, sums + lam])
    if jumps is None:
        kappa = np.zeros_like(sums)
    else:
        kappa = nig_jump_cumulant(sums, jumps)
    m = len(lams_after)
    coeff = np.zeros(1 << m)
    for c in range(1 << m):
        t_mask = (c << 1) | 1
        size_t = bin(t_mask).count("1")
        acc = 0.0
        r = t_mask
        while True:
            acc += (-1.0) ** (size_t - bin(r).count("1")) * kappa[r]
            if r == 0:
                break
            r = (r - 1) & t_mask
        coeff[c] = acc
    return coeff


class DriftEvaluator:
    """Drift machinery for one setup on one time grid.

    Precomputes, per grid step, the loadings in force on the open interval,
    the active rates and their expansion coefficient tables; evaluation then
    runs one pass over the rates from the back of the tenor, growing the
    subset products incrementally so every rate reuses the products built
    for the rates after it.
    """

    def __init__(self, setup: MarketSetup, grid,
                 method: DriftMethod = DriftMethod.CUMULANT_EXPANSION) -> None:
        self.setup = setup
        self.method = method
        times = np.asarray(getattr(grid, "times", grid), dtype=float)
        if times.size < 2 or np.any(np.diff(times) <= 0.0):
            raise ValueError("grid times must be strictly increasing")
        self.times = times
        self.dt = np.diff(times)
        mids = 0.5 * (times[:-1] + times[1:])
        self.mids = mids
        n = setup.n_rates
        self.n_rates = n
        vols = setup.vols
        self.step_vols = np.array([[vols.vol_at(t, i) for i in range(1, n + 1)]
                                   for t in mids])
        self.step_gauss = np.array([setup.triplet.gauss(t) for t in mids])
        self.accruals = np.array([setup.tenor.accrual(i)
                                  for i in range(1, n + 1)])
        self._tables: dict[tuple[float, ...], np.ndarray] = {}
        # Per step: active rate columns in descending order and their tables.
        self._plan: list[list[tuple[int, np.ndarray]]] = []
        for k in range(len(self.dt)):
            lam = self.step_vols[k]
            active = [col for col in range(n) if lam[col] != 0.0]
            plan_k = []
            for col in reversed(active):
                after = tuple(lam[c] for c in reversed(active) if c > col)
                key = (lam[col],) + after
                table = self._tables.get(key)
                if table is None:
                    table = _subset_coefficients(lam[col], after, setup)
                    self._tables[key] = table
                plan_k.append((col, table))
            self._plan.append(plan_k)

    @property
    def n_steps(self) -> int:
        return len(self.dt)

    def step_drift(self, k: int, z: np.ndarray) -> np.ndarray:
        """Drift rates b(step k, rate; z) for a batch of states.

        ``z`` has shape (paths, rates); dead rates get drift zero.  The state
        is read as-is (the caller decides whether it holds exact log rates,
        frozen initial values or stage-one proxies).
        """
        if self.method is DriftMethod.QUADRATURE:
            return self._step_drift_quadrature(k, z)
        lam = self.step_vols[k]
        c = self.step_gauss[k]
        paths = z.shape[0]
        out = np.zeros((paths, self.n_rates))
        subset_products = np.ones((paths, 1))
        gauss_sum = np.zeros(paths) if c > 0.0 else None
        for col, table in self._plan[k]:
            j_term = subset_products @ table
            if c > 0.0:
                out[:, col] = (-0.5 * lam[col] * lam[col] * c
                               - c * lam[col] * gauss_sum - j_term)
            else:
                out[:, col] = -j_term
            weight = link_weight(z[:, col], self.accruals[col])
            subset_products = np.concatenate(
                [subset_products, weight[:, None] * subset_products], axis=1)
            if c > 0.0:
                gauss_sum = gauss_sum + lam[col] * weight
        return out

    def _step_drift_quadrature(self, k: int, z: np.ndarray) -> np.ndarray:
        t = self.mids[k]
        paths = z.shape[0]
        out = np.zeros((paths, self.n_rates))
        for p in range(paths):
            state = StateVector(z[p])
            for col in range(self.n_rates):
                if self.step_vols[k, col] != 0.0:
                    out[p, col] = terminal_drift(
                        t, col + 1, state, self.setup, DriftMethod.QUADRATURE)
        return out

    def frozen_table(self, state0: np.ndarray | None = None) -> np.ndarray:
        """Deterministic drift table b(t_k, T_i; X(0)), shape (steps, rates)."""
        z0 = (self.setup.log_initial_rates if state0 is None
              else np.asarray(state0, dtype=float))
        rows = [self.step_drift(k, z0[None, :])[0] for k in range(self.n_steps)]
        return np.array(rows)


def drift_cumulant_expansion(s: float, i: int, state: StateVector,
                             setup: MarketSetup) -> float:
    """Jump-integral term ``J`` of the drift via the cumulant expansion."""
    lam_i, weights, lams = _drift_inputs(s, i, state, setup)
    if lam_i == 0.0:
        return 0.0
    table = _subset_coefficients(lam_i, lams, setup)
    products = np.ones(1)
    for w in weights:
        products = np.concatenate([products, w * products])
    return float(products @ table)


def drift_quadrature(s: float, i: int, state: StateVector,
                     setup: MarketSetup) -> float:
    """Jump-integral term ``J`` by adaptive quadrature against the Levy
    density; the independent route the expansion is checked against.

    The integrand is kept in compensated form,

        g(x) = [expm1(lam_i x) - lam_i x]
               + expm1(lam_i x) * [prod_l jump_factor - 1],

    which vanishes to second order at the origin where the density blows up
    like ``x^-2``; below ``|x| = 1e-6`` the finite product ``g * density`` is
    replaced by its analytic limit.
    """
    lam_i, weights, lams = _drift_inputs(s, i, state, setup)
    if lam_i == 0.0:
        return 0.0
    jumps = setup.triplet.jumps
    if jumps is None:
        return 0.0
    weights = np.asarray(weights)
    lams = np.asarray(lams)

    limit_value = (jumps.delta / np.pi) * lam_i * (
        0.5 * lam_i + float(np.sum(weights * lams)))

    # Beyond this point the exponentials overflow while the density's decay
    # (guaranteed by the moment-domain check) has already pushed the true
    # integrand far below the quadrature tolerance; cut it to zero there.
    lam_total = abs(lam_i) + float(np.sum(np.abs(lams)))
    x_cap = 600.0 / max(lam_total, 1e-300)

    def integrand(x: float) -> float:
        if abs(x) > x_cap:
            return 0.0
        base = np.expm1(lam_i * x)
        correction = 1.0
        for w, lam in zip(weights, lams):
            correction *= 1.0 + w * np.expm1(lam * x)
        g = (base - lam_i * x) + base * (correction - 1.0)
        return g * nig_levy_density(x, jumps)

    cut = 1e-6
    total = 2.0 * cut * limit_value
    for a, b in ((cut, 1.0), (1.0, 10.0), (10.0, 100.0), (100.0, np.inf)):
        for sign in (1.0, -1.0):
            lo, hi = sign * a, sign * b
            if lo > hi:
                lo, hi = hi, lo
            val, _ = quad(integrand, lo, hi, epsabs=1e-13, epsrel=1e-11,
                          limit=300)
            total += val
    return total


def _drift_inputs(s: float, i: int, state: StateVector, setup: MarketSetup):
    """Loading of rate ``i`` plus weights and loadings of the live rates
    after it, at time ``s``."""
    n = setup.n_rates
    if not 1 <= i <= n:
        raise IndexError(f"rate index {i} outside 1..{n}")
    values = state.values
    if values.shape != (n,):
        raise ValueError(f"state must hold {n} log rates, got {values.shape}")
    lam_i = setup.vols.vol_at(s, i)
    weights = []
    lams = []
    for l in range(i + 1, n + 1):
        lam_l = setup.vols.vol_at(s, l)
        if lam_l != 0.0:
            weights.append(link_weight(values[l - 1], setup.tenor.accrual(l)))
            lams.append(lam_l)
    return lam_i, tuple(weights), tuple(lams)


def terminal_drift(s: float, i: int, state: StateVector, setup: MarketSetup,
                   method: DriftMethod = DriftMethod.CUMULANT_EXPANSION
                   ) -> float:
    """Drift rate of log L(., T_i) under the terminal measure.

    Zero past the fixing date of rate ``i`` (its loading has been cut off).
    The Gaussian contribution is closed form; the jump integral ``J`` goes
    through the method selected.
    """
    lam_i = setup.vols.vol_at(s, i)
    if lam_i == 0.0:
        return 0.0
    if method is DriftMethod.QUADRATURE:
        j_term = drift_quadrature(s, i, state, setup)
    else:
        j_term = drift_cumulant_expansion(s, i, state, setup)
    c = setup.triplet.gauss(s)
    out = -j_term
    if c > 0.0:
        _, weights, lams = _drift_inputs(s, i, state, setup)
        gauss_sum = float(np.sum(np.asarray(weights) * np.asarray(lams)))
        out -= 0.5 * lam_i * lam_i * c + c * lam_i * gauss_sum
    return out


def deterministic_drift_table(grid, setup: MarketSetup,
                              state0: np.ndarray | None = None) -> np.ndarray:
    """Drift table with the state frozen at the initial log rates.

    Shape (steps, rates); row ``k`` holds ``b(t_k, T_i; X(0))`` for the open
    interval ``(t_k, t_(k+1))``.  This is the whole drift input of the
    deterministic-drift scheme and of stage one of the corrected scheme.
    """
    return DriftEvaluator(setup, grid).frozen_table(state0)
