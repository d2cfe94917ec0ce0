"""Time-inhomogeneous Levy drivers for the forward-rate engine.

The driving process H is described by piecewise-constant local
characteristics (b, c, F): a deterministic drift rate, a Gaussian variance
rate and a normal inverse Gaussian (NIG) jump measure.  Everything the rest
of the engine needs from H lives here: cumulant functions, exact increment
sampling, per-path random substreams and the exponential-moment checks that
make the forward-rate construction well defined.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import k1e


class CumulantDomainError(ValueError):
    """Cumulant argument outside the finite exponential-moment domain."""


# ---------------------------------------------------------------------------
# NIG law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NigParams:
    """Normal inverse Gaussian law per unit of time.

    The jump part of the driver accumulates NIG increments: over a step of
    length ``dt`` it is distributed NIG(alpha, beta, delta * dt, mu * dt).

    Parameters
    ----------
    alpha : float
        Tail decay rate, ``alpha > 0``.
    beta : float
        Skewness, ``|beta| < alpha``.
    delta : float
        Scale per unit time, ``delta > 0``.
    mu : float
        Location per unit time.
    """

    alpha: float
    beta: float = 0.0
    delta: float = 1.0
    mu: float = 0.0

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.delta > 0.0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not abs(self.beta) < self.alpha:
            raise ValueError(
                f"need |beta| < alpha, got beta={self.beta}, alpha={self.alpha}"
            )

    @property
    def gamma(self) -> float:
        """sqrt(alpha^2 - beta^2), the inverse Gaussian rate parameter."""
        return math.sqrt((self.alpha - self.beta) * (self.alpha + self.beta))


def _check_cumulant_domain(shifted: np.ndarray, p: NigParams, what: str) -> None:
    bad = np.abs(shifted) > p.alpha
    if np.any(bad):
        worst = float(np.max(np.abs(shifted)))
        raise CumulantDomainError(
            f"{what}: |beta + u| = {worst:.17g} exceeds alpha = {p.alpha:.17g}; "
            f"finite exponential moments require |beta + u| <= alpha"
        )


def nig_cumulant(u, p: NigParams):
    """Cumulant (log moment generating) function of the NIG law per unit time.

    kappa(u) = mu*u + delta*(gamma - sqrt(alpha^2 - (beta + u)^2)), finite for
    |beta + u| <= alpha including the boundary.  Accepts scalars or arrays.

    Raises
    ------
    CumulantDomainError
        If any argument leaves the closed domain.
    """
    ua = np.asarray(u, dtype=float)
    shifted = p.beta + ua
    _check_cumulant_domain(shifted, p, "nig_cumulant")
    radicand = np.maximum((p.alpha - shifted) * (p.alpha + shifted), 0.0)
    out = p.mu * ua + p.delta * (p.gamma - np.sqrt(radicand))
    return float(out) if ua.ndim == 0 else out


def nig_jump_cumulant(u, p: NigParams):
    """Compensated jump integral int (e^(u x) - 1 - u x) F(dx) per unit time.

    Equals the distribution cumulant stripped of its linear part:
    delta*(gamma - sqrt(alpha^2 - (beta + u)^2)) - (delta*beta/gamma)*u.
    For the symmetric martingale case (beta = mu = 0) this coincides with
    :func:`nig_cumulant`.  Does not depend on ``mu``.
    """
    ua = np.asarray(u, dtype=float)
    shifted = p.beta + ua
    _check_cumulant_domain(shifted, p, "nig_jump_cumulant")
    radicand = np.maximum((p.alpha - shifted) * (p.alpha + shifted), 0.0)
    out = p.delta * (p.gamma - np.sqrt(radicand)) - (p.delta * p.beta / p.gamma) * ua
    return float(out) if ua.ndim == 0 else out


def nig_levy_density(x, p: NigParams):
    """Levy density of the NIG law: delta*alpha/pi * e^(beta x) K_1(alpha|x|)/|x|.

    Uses the exponentially scaled Bessel function so the value stays finite
    for large ``|x|``; the non-integrable ``1/x^2`` blowup at the origin is the
    law's own (callers integrate compensated functions vanishing to second
    order at zero).
    """
    xa = np.asarray(x, dtype=float)
    ax = np.abs(xa)
    with np.errstate(divide="ignore"):
        out = (p.delta * p.alpha / np.pi) * k1e(p.alpha * ax) * np.exp(
            p.beta * xa - p.alpha * ax
        ) / ax
    return float(out) if xa.ndim == 0 else out


def nig_mean_rate(p: NigParams) -> float:
    """Mean of the law per unit time: mu + delta*beta/gamma."""
    return p.mu + p.delta * p.beta / p.gamma


def nig_variance_rate(p: NigParams) -> float:
    """Variance of the law per unit time: delta*alpha^2/gamma^3."""
    return p.delta * p.alpha**2 / p.gamma**3


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_inverse_gaussian(mean, shape, rng: np.random.Generator, size=None):
    """Draw inverse Gaussian variates IG(mean, shape).

    Delegates to the generator's Wald sampler, which implements the
    Michael-Schucany-Haas transformation: one chi-square candidate root and
    one uniform choosing between the two roots, no rejection loop.
    """
    mean_a = np.asarray(mean, dtype=float)
    shape_a = np.asarray(shape, dtype=float)
    if np.any(mean_a <= 0.0) or np.any(shape_a <= 0.0):
        raise ValueError("inverse Gaussian mean and shape must be positive")
    return rng.wald(mean_a, shape_a, size=size)


def sample_nig_increment(dt, p: NigParams, rng: np.random.Generator, size=None):
    """Sample an increment of the NIG jump part over time ``dt``.

    The variate is distributed NIG(alpha, beta, delta*dt, mu*dt), drawn by
    inverse Gaussian subordination: Z ~ IG(delta*dt/gamma, (delta*dt)^2)
    is the variance of a conditional Gaussian, X = mu*dt + beta*Z + sqrt(Z)*N.

    ``dt`` may be an array (one increment per entry); ``size`` requests that
    many draws for scalar ``dt``.
    """
    dt_a = np.asarray(dt, dtype=float)
    if np.any(dt_a <= 0.0):
        raise ValueError("dt must be positive")
    scaled = p.delta * dt_a
    z = sample_inverse_gaussian(scaled / p.gamma, scaled * scaled, rng, size=size)
    n = rng.standard_normal(np.shape(z))
    out = p.mu * dt_a + p.beta * z + np.sqrt(z) * n
    return float(out) if np.ndim(out) == 0 else out


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Independent random substream for one simulated path.

    Streams are keyed by ``(seed, path_index)`` through the Philox counter
    generator, so the draws of path ``j`` do not depend on how many paths are
    simulated, in what order, or how work is split across threads.
    """
    if path_index < 0:
        raise ValueError("path_index must be nonnegative")
    mask = (1 << 64) - 1
    key = np.array([seed & mask, path_index & mask], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# Local characteristics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous step function of time.

    ``values[k]`` applies on ``[breaks[k-1], breaks[k])`` with the first value
    holding before ``breaks[0]`` and the last from ``breaks[-1]`` on.
    """

    values: tuple[float, ...]
    breaks: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.values) != len(self.breaks) + 1:
            raise ValueError("need exactly one more value than breakpoints")
        if any(x >= y for x, y in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, value: float) -> "PiecewiseConstant":
        return cls((float(value),))

    def __call__(self, t: float) -> float:
        return self.values[bisect.bisect_right(self.breaks, t)]

    @property
    def max_abs(self) -> float:
        return max(abs(v) for v in self.values)


@dataclass(frozen=True)
class LevyTriplet:
    """Local characteristics (b, c, F) of the driving process.

    ``drift`` and ``gauss`` are deterministic piecewise-constant rates; the
    jump measure is an NIG family scaled by time (``None`` for a continuous
    driver).  Within one constant piece the increment of the driver over
    ``[t, t + dt)`` is ``b(t)*dt + N(0, c(t)*dt) + NIG(alpha, beta, delta*dt,
    mu*dt)``.
    """

    drift: PiecewiseConstant = PiecewiseConstant.constant(0.0)
    gauss: PiecewiseConstant = PiecewiseConstant.constant(0.0)
    jumps: NigParams | None = None

    def __post_init__(self) -> None:
        if any(v < 0.0 for v in self.gauss.values):
            raise ValueError("Gaussian variance rate must be nonnegative")

    @classmethod
    def pure_jump(cls, jumps: NigParams) -> "LevyTriplet":
        """Driftless continuous-part-free driver: only NIG jumps."""
        return cls(jumps=jumps)

    def cumulant(self, u, t: float):
        """Cumulant of the driver per unit time at time ``t``."""
        ua = np.asarray(u, dtype=float)
        out = self.drift(t) * ua + 0.5 * self.gauss(t) * ua * ua
        if self.jumps is not None:
            out = out + nig_cumulant(ua, self.jumps)
        return float(out) if ua.ndim == 0 else out

    def jump_cumulant(self, u):
        """Compensated jump integral per unit time (zero without jumps)."""
        ua = np.asarray(u, dtype=float)
        if self.jumps is None:
            out = np.zeros_like(ua)
        else:
            out = nig_jump_cumulant(ua, self.jumps)
        return float(out) if ua.ndim == 0 else out

    def mean_rate(self, t: float) -> float:
        """Expected driver increment per unit time at time ``t``."""
        out = self.drift(t)
        if self.jumps is not None:
            out += nig_mean_rate(self.jumps)
        return out

    @property
    def has_gauss(self) -> bool:
        return any(v > 0.0 for v in self.gauss.values)


@dataclass(frozen=True)
class DriverIncrements:
    """Increments of the driver along a simulation grid, one path.

    ``jump``, ``gauss`` and ``drift`` are the three parts of the increment per
    grid step; ``dh`` is their sum, the quantity the log-rate recursions
    multiply by the volatility loadings.
    """

    times: np.ndarray
    jump: np.ndarray
    gauss: np.ndarray | None
    drift: np.ndarray

    @property
    def dh(self) -> np.ndarray:
        out = self.drift + self.jump
        if self.gauss is not None:
            out = out + self.gauss
        return out


def simulate_driver_increments(grid, triplet: LevyTriplet,
                               rng: np.random.Generator) -> DriverIncrements:
    """Sample exact-in-law increments of the driver over each grid step.

    ``grid`` may be a simulation grid object (its ``times`` attribute is used)
    or a plain increasing array of times.  Characteristics are read at step
    midpoints, which is exact whenever the grid refines their breakpoints.
    Gaussian increments are drawn before jump increments, so two calls with
    identical substreams produce identical paths regardless of scheme.
    """
    times = np.asarray(getattr(grid, "times", grid), dtype=float)
    dt = np.diff(times)
    if dt.size == 0 or np.any(dt <= 0.0):
        raise ValueError("grid times must be strictly increasing with >= 1 step")
    mids = 0.5 * (times[:-1] + times[1:])
    b = np.array([triplet.drift(t) for t in mids])
    c = np.array([triplet.gauss(t) for t in mids])
    gauss = None
    if triplet.has_gauss:
        gauss = np.sqrt(c * dt) * rng.standard_normal(dt.size)
    if triplet.jumps is not None:
        jump = sample_nig_increment(dt, triplet.jumps, rng)
    else:
        jump = np.zeros_like(dt)
    return DriverIncrements(times=times, jump=jump, gauss=gauss, drift=b * dt)


# ---------------------------------------------------------------------------
# Exponential-moment validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentialMomentBound:
    """Uniform bound on volatility loadings used by the drift integrals.

    ``bound`` is the ceiling for the summed loadings; ``slack`` is a relative
    safety margin: the law must keep finite exponential moments up to
    ``(1 + slack) * bound``.
    """

    bound: float
    slack: float = 0.0

    def __post_init__(self) -> None:
        if not self.bound > 0.0:
            raise ValueError("bound must be positive")
        if self.slack < 0.0:
            raise ValueError("slack must be nonnegative")


@dataclass(frozen=True)
class ExponentialMomentReport:
    """Outcome of the exponential-moment check, one flag per condition."""

    vol_sum: float
    bound: float
    required: float
    domain_halfwidth: float
    sum_ok: bool
    domain_ok: bool

    @property
    def passed(self) -> bool:
        return self.sum_ok and self.domain_ok

    def lines(self) -> list[str]:
        s = "ok" if self.sum_ok else "FAIL"
        d = "ok" if self.domain_ok else "FAIL"
        return [
            f"[{s}] summed volatility loadings {self.vol_sum:.6g} <= bound {self.bound:.6g}",
            f"[{d}] required moment range {self.required:.6g} <= domain halfwidth "
            f"{self.domain_halfwidth:.6g}",
        ]


def validate_exponential_moments(vol_sups: Sequence[float],
                                 cfg: ExponentialMomentBound,
                                 p: NigParams) -> ExponentialMomentReport:
    """Check that every drift integral stays inside the finite-moment domain.

    The drift of each rate evaluates cumulants at sums of volatility
    loadings; with ``sum_i sup_t |lambda_i(t)| <= bound`` every such argument
    lies in ``[-bound, bound]``.  The NIG law has finite exponential moments
    exactly for arguments ``u`` with ``|beta + u| <= alpha`` (boundary
    included), so the check requires ``(1 + slack) * bound <= alpha - |beta|``.

    ``vol_sups`` holds one number per rate: the sup over time of the absolute
    volatility loading.
    """
    vol_sum = float(np.sum(np.abs(np.asarray(vol_sups, dtype=float))))
    halfwidth = p.alpha - abs(p.beta)
    required = (1.0 + cfg.slack) * cfg.bound
    return ExponentialMomentReport(
        vol_sum=vol_sum,
        bound=cfg.bound,
        required=required,
        domain_halfwidth=halfwidth,
        sum_ok=vol_sum <= cfg.bound,
        domain_ok=required <= halfwidth,
    )
