"""Path simulation of the log forward rates under the terminal measure.

Three schemes integrate the same log-rate equation

    z_i(t_(k+1)) = z_i(t_k) + b(t_k, T_i; state) dt_k + lam_i(t_k) dH_k :

* ``FULL_SDE``     reads the drift from the simulated state at the left grid
                   point (joint Euler recursion over all rates),
* ``FROZEN_DRIFT`` reads it from the initial state (drift deterministic),
* ``STRONG_TAYLOR`` runs the deterministic-drift recursion first and feeds
                   those stage-one paths into the drift of a second pass.

All three consume identical driver increments, so runs at the same seed are
coupled pathwise; the last rate has a state-free drift and is produced by
the same arithmetic in every scheme, bit for bit.  Loadings appearing in a
step are the ones in force on the open interval (read at the midpoint), so
a rate stays exactly constant from its fixing date on.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence

import numpy as np

from .drift import DriftEvaluator, DriftMethod
from .driver import path_rng, sample_inverse_gaussian, simulate_driver_increments
from .market import MarketSetup, TenorStructure

DEFAULT_BATCH = 4096


class Scheme(Enum):
    FULL_SDE = "full"
    FROZEN_DRIFT = "frozen"
    STRONG_TAYLOR = "taylor"

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        for s in cls:
            if s.value == text:
                return s
        raise ValueError(f"unknown scheme {text!r}; "
                         f"choose from {[s.value for s in cls]}")


@dataclass(frozen=True)
class SimulationGrid:
    """Time grid from 0 to the last fixing date, tenor dates on the grid."""

    times: np.ndarray
    tenor_indices: np.ndarray
    substeps: int

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def fixing_index(self, i: int) -> int:
        """Grid index of the fixing date ``T_i``."""
        return int(self.tenor_indices[i])


def build_grid(tenor: TenorStructure, substeps: int) -> SimulationGrid:
    """Uniform refinement of the accrual intervals up to the last fixing.

    ``substeps`` steps per accrual interval; tenor dates land on the grid
    exactly (they are inserted, not accumulated).
    """
    if substeps < 1:
        raise ValueError("substeps must be a positive integer")
    if tenor.date(0) != 0.0:
        raise ValueError("simulation assumes the first tenor date is 0")
    n = tenor.n_rates
    times = []
    for j in range(n):
        left, right = tenor.date(j), tenor.date(j + 1)
        for s in range(substeps):
            times.append(left + (right - left) * (s / substeps))
    times.append(tenor.date(n))
    grid_times = np.asarray(times)
    grid_times.setflags(write=False)
    tenor_indices = np.arange(0, n * substeps + 1, substeps)
    tenor_indices.setflags(write=False)
    return SimulationGrid(times=grid_times, tenor_indices=tenor_indices,
                          substeps=substeps)


@dataclass(frozen=True)
class PathBundle:
    """One simulated path: log-rate trajectories plus tenor-date fixings.

    ``log_rates[i-1, k]`` is log L(t_k, T_i); rows are constant past the
    fixing date.  ``fixings[i-1, l-1]`` holds L(T_i, T_l) for ``l >= i`` and
    nan below the diagonal.  ``valid`` is False when the path overflowed
    (any non-finite log rate or fixing); estimators skip and count these.
    """

    scheme: Scheme
    grid: SimulationGrid
    log_rates: np.ndarray
    fixings: np.ndarray
    seed: int
    path_index: int
    valid: bool


class SimulationEngine:
    """Shared machinery for one (setup, grid, drift method) triple.

    Holds the precomputed drift evaluator, the deterministic drift table and
    the per-step sampling constants, so ensembles and pricing runs pay the
    setup cost once.
    """

    def __init__(self, setup: MarketSetup, grid: SimulationGrid,
                 drift_method: DriftMethod = DriftMethod.CUMULANT_EXPANSION
                 ) -> None:
        self.setup = setup
        self.grid = grid
        self.evaluator = DriftEvaluator(setup, grid, drift_method)
        self.frozen_table = self.evaluator.frozen_table()
        self.dt = self.evaluator.dt
        self.step_vols = self.evaluator.step_vols
        self.z0 = np.asarray(setup.log_initial_rates, dtype=float)
        self.n_rates = setup.n_rates
        triplet = setup.triplet
        mids = self.evaluator.mids
        self._drift_dt = np.array([triplet.drift(t) for t in mids]) * self.dt
        gauss = np.array([triplet.gauss(t) for t in mids])
        self._gauss_sd = np.sqrt(gauss * self.dt) if triplet.has_gauss else None
        self._jumps = triplet.jumps
        if self._jumps is not None:
            scaled = self._jumps.delta * self.dt
            self._ig_mean = scaled / self._jumps.gamma
            self._ig_shape = scaled * scaled

    # -- driver increments -------------------------------------------------

    def path_increments(self, seed: int, first_index: int,
                        count: int) -> np.ndarray:
        """Total driver increments dH for paths ``first_index`` onward.

        Each path draws from its own substream; the draw order per path
        matches :func:`simulate_driver_increments` (Gaussian part first),
        so the two routes produce identical paths from identical streams.
        """
        k = len(self.dt)
        out = np.empty((count, k))
        for j in range(count):
            rng = path_rng(seed, first_index + j)
            dh = self._drift_dt.copy()
            if self._gauss_sd is not None:
                dh += self._gauss_sd * rng.standard_normal(k)
            if self._jumps is not None:
                z = sample_inverse_gaussian(self._ig_mean, self._ig_shape, rng)
                dh += (self._jumps.mu * self.dt + self._jumps.beta * z
                       + np.sqrt(z) * rng.standard_normal(k))
            out[j] = dh
        return out

    # -- log-rate recursions -----------------------------------------------

    def _recurse(self, drift_fn, dh: np.ndarray) -> np.ndarray:
        paths = dh.shape[0]
        out = np.empty((paths, self.n_rates, len(self.dt) + 1))
        z = np.repeat(self.z0[None, :], paths, axis=0)
        out[:, :, 0] = z
        for k in range(len(self.dt)):
            b = drift_fn(k, z)
            z = z + b * self.dt[k] + dh[:, k, None] * self.step_vols[k][None, :]
            out[:, :, k + 1] = z
        return out

    def evolve(self, scheme: Scheme, dh: np.ndarray,
               stage1: np.ndarray | None = None) -> np.ndarray:
        """Log-rate paths (paths, rates, grid points) for one scheme.

        ``stage1`` lets the corrected scheme reuse deterministic-drift paths
        already computed for the same increments.
        """
        if scheme is Scheme.FROZEN_DRIFT:
            table = self.frozen_table
            return self._recurse(
                lambda k, z: np.broadcast_to(table[k], z.shape), dh)
        if scheme is Scheme.FULL_SDE:
            return self._recurse(self.evaluator.step_drift, dh)
        if scheme is Scheme.STRONG_TAYLOR:
            if stage1 is None:
                stage1 = self.evolve(Scheme.FROZEN_DRIFT, dh)
            return self._recurse(
                lambda k, z: self.evaluator.step_drift(k, stage1[:, :, k]), dh)
        raise ValueError(f"unknown scheme {scheme}")

    # -- derived quantities --------------------------------------------------

    def fixings(self, log_paths: np.ndarray) -> np.ndarray:
        """Tenor-date fixings L(T_i, T_l), nan below the diagonal."""
        paths, n, _ = log_paths.shape
        out = np.full((paths, n, n), np.nan)
        with np.errstate(over="ignore"):
            for i in range(1, n + 1):
                idx = self.grid.fixing_index(i)
                out[:, i - 1, i - 1:] = np.exp(log_paths[:, i - 1:, idx])
        return out

    def valid_mask(self, log_paths: np.ndarray,
                   fixings: np.ndarray) -> np.ndarray:
        ok = np.isfinite(log_paths).all(axis=(1, 2))
        n = self.n_rates
        for i in range(n):
            ok &= np.isfinite(fixings[:, i, i:]).all(axis=1)
        return ok


def simulate_path(scheme: Scheme, grid: SimulationGrid, setup: MarketSetup,
                  rng: np.random.Generator,
                  drift_method: DriftMethod = DriftMethod.CUMULANT_EXPANSION,
                  seed: int = -1, path_index: int = 0,
                  _engine: SimulationEngine | None = None) -> PathBundle:
    """Simulate a single path from an explicit substream.

    Standalone calls rebuild the drift tables each time; ensembles go
    through :func:`simulate_ensemble`, which shares one engine.
    """
    engine = _engine or SimulationEngine(setup, grid, drift_method)
    inc = simulate_driver_increments(grid, setup.triplet, rng)
    dh = inc.dh[None, :]
    log_paths = engine.evolve(scheme, dh)
    fixings = engine.fixings(log_paths)
    valid = bool(engine.valid_mask(log_paths, fixings)[0])
    return PathBundle(scheme=scheme, grid=grid, log_rates=log_paths[0],
                      fixings=fixings[0], seed=seed, path_index=path_index,
                      valid=valid)


def simulate_ensemble(scheme: Scheme, grid: SimulationGrid,
                      setup: MarketSetup, n_paths: int, seed: int,
                      drift_method: DriftMethod = DriftMethod.CUMULANT_EXPANSION,
                      batch_size: int = DEFAULT_BATCH
                      ) -> Iterator[PathBundle]:
    """Yield ``n_paths`` bundles in path order.

    Path ``j`` depends only on ``(seed, j)``: the same bundle comes back no
    matter the batch size or how many paths are requested alongside it.
    """
    engine = SimulationEngine(setup, grid, drift_method)
    for start in range(0, n_paths, batch_size):
        count = min(batch_size, n_paths - start)
        dh = engine.path_increments(seed, start, count)
        log_paths = engine.evolve(scheme, dh)
        fixings = engine.fixings(log_paths)
        valid = engine.valid_mask(log_paths, fixings)
        for j in range(count):
            yield PathBundle(scheme=scheme, grid=grid,
                             log_rates=log_paths[j], fixings=fixings[j],
                             seed=seed, path_index=start + j,
                             valid=bool(valid[j]))


def dump_paths(bundles: Iterable[PathBundle], file) -> int:
    """Write bundles as CSV, one row per (path, rate, grid point).

    Returns the number of rows written.  ``file`` is an open text handle.
    """
    writer = csv.writer(file, lineterminator="\n")
    writer.writerow(["path", "scheme", "rate", "time", "log_rate", "valid"])
    rows = 0
    for b in bundles:
        for i in range(1, b.log_rates.shape[0] + 1):
            for k, t in enumerate(b.grid.times):
                writer.writerow([b.path_index, b.scheme.value, i,
                                 f"{t:.10g}", f"{b.log_rates[i - 1, k]:.17g}",
                                 int(b.valid)])
                rows += 1
    return rows
