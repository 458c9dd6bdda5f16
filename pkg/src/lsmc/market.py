"""Correlated multi-asset geometric Brownian motion on an exercise schedule.

Paths are simulated with the exact log-normal step, so no time-discretization
bias enters the estimators.  Normal draws come from a counter-based generator:
the draw for (path, date, asset) is a pure 64-bit hash of (seed, counter), so
any subset of paths can be regenerated in any order, on any number of workers,
with bit-identical results.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_DUMP_HEADER = struct.Struct("<qqqQq")  # n_paths, n_dates, n_assets, seed, antithetic


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer; bijective avalanche mix of uint64 words."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _standard_normals(seed: int, counters: np.ndarray) -> np.ndarray:
    """Standard normals indexed by counter: Phi^{-1} of the keyed hash stream.

    Word c of stream `seed` is mix64(key + (c+1) * golden) with
    key = mix64(seed + golden), i.e. the SplitMix64 sequence evaluated at an
    arbitrary position.  The top 53 bits map to a uniform in (0, 1) which is
    sent through the inverse normal CDF (scipy's ndtri, accurate to machine
    precision, well inside the 1e-9 requirement).
    """
    with np.errstate(over="ignore"):
        key = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)
        words = _mix64(key + (counters + np.uint64(1)) * _GOLDEN)
    u = (words >> np.uint64(11)).astype(np.float64) * 2.0**-53 + 2.0**-54
    return ndtri(u)


@dataclass(frozen=True, eq=False)
class GbmModel:
    """Risk-neutral GBM parameters for J correlated assets.

    dS_j / S_j = (rate - dividend_j) dt + vol_j dW_j,
    dW_j dW_k = correlation[j, k] dt.
    """

    spot: np.ndarray
    rate: float
    dividend: np.ndarray
    vol: np.ndarray
    correlation: np.ndarray

    def __post_init__(self) -> None:
        spot = np.atleast_1d(np.asarray(self.spot, dtype=float))
        dividend = np.atleast_1d(np.asarray(self.dividend, dtype=float))
        vol = np.atleast_1d(np.asarray(self.vol, dtype=float))
        corr = np.atleast_2d(np.asarray(self.correlation, dtype=float))
        j = spot.shape[0]
        if dividend.shape != (j,) or vol.shape != (j,) or corr.shape != (j, j):
            raise ValueError("inconsistent parameter shapes for the asset count")
        if not (spot > 0.0).all():
            raise ValueError("spot prices must be strictly positive")
        if (vol < 0.0).any():
            raise ValueError("volatilities must be non-negative")
        if not np.allclose(corr, corr.T, atol=1e-12):
            raise ValueError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
            raise ValueError("correlation matrix must have a unit diagonal")
        object.__setattr__(self, "spot", spot)
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "dividend", dividend)
        object.__setattr__(self, "vol", vol)
        object.__setattr__(self, "correlation", corr)

    @property
    def n_assets(self) -> int:
        return self.spot.shape[0]


@dataclass(frozen=True, eq=False)
class ExerciseSchedule:
    """Strictly increasing exercise times t_1 < ... < t_I = T, in years.

    Valuation time 0 is not an exercise time, so times[0] must be positive.
    """

    times: np.ndarray

    def __post_init__(self) -> None:
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        if t.size < 1 or t[0] <= 0.0:
            raise ValueError("first exercise time must be strictly positive")
        if (np.diff(t) <= 0.0).any():
            raise ValueError("exercise times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @property
    def n_dates(self) -> int:
        return self.times.shape[0]

    @property
    def maturity(self) -> float:
        return float(self.times[-1])


def uniform_schedule(n_dates: int, maturity: float) -> ExerciseSchedule:
    return ExerciseSchedule(maturity * np.arange(1, n_dates + 1) / n_dates)


@dataclass(frozen=True, eq=False)
class PathSet:
    """N simulated state trajectories over the exercise schedule.

    values[n, i, j] is the price of asset j on path n at exercise date i.
    times and rate are carried along so pricing code can discount payoffs.
    pool_offset records the origin inside a parent pool (0 if standalone).
    """

    values: np.ndarray
    times: np.ndarray
    rate: float
    seed: int
    antithetic: bool
    pool_offset: int = 0

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_dates(self) -> int:
        return self.values.shape[1]

    @property
    def n_assets(self) -> int:
        return self.values.shape[2]

    @property
    def provenance(self) -> tuple:
        """Identity of the generating stream and slice; equal provenance means same paths."""
        return (
            self.seed,
            self.antithetic,
            self.pool_offset,
            self.n_paths,
            self.n_assets,
            float(self.rate),
            tuple(float(t) for t in self.times),
        )


def correlation_factor(correlation: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T equal to the correlation matrix.

    Near-singular matrices get a floored retry: chol(rho + (|lambda_min| + 1e-12) I).
    Matrices indefinite beyond an 1e-8 eigenvalue tolerance are rejected.
    """
    corr = np.atleast_2d(np.asarray(correlation, dtype=float))
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ValueError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ValueError("correlation matrix must have a unit diagonal")
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        lam_min = float(np.linalg.eigvalsh(corr)[0])
        if lam_min < -1e-8:
            raise ValueError(
                f"correlation matrix is not positive semidefinite (lambda_min={lam_min:.3e})"
            ) from None
        floor = abs(lam_min) + 1e-12
        return np.linalg.cholesky(corr + floor * np.eye(corr.shape[0]))


def generate_paths(
    model: GbmModel,
    schedule: ExerciseSchedule,
    n_paths: int,
    seed: int,
    antithetic: bool = True,
) -> PathSet:
    """Simulate n_paths exact GBM trajectories on the schedule.

    Each step applies
        S_j(t_{i+1}) = S_j(t_i) * exp((r - q_j - vol_j^2 / 2) dt + vol_j sqrt(dt) (L z)_j)
    with z drawn from the counter stream of `seed`.  With antithetic=True the
    paths (2k, 2k+1) share draws with opposite signs, so n_paths must be even.
    The result depends only on (model, schedule, n_paths, seed, antithetic).
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    if antithetic and n_paths % 2 != 0:
        raise ValueError("n_paths must be even for antithetic sampling")

    n_dates, n_assets = schedule.n_dates, model.n_assets
    chol = correlation_factor(model.correlation)

    n_base = n_paths // 2 if antithetic else n_paths
    counters = np.arange(n_base * n_dates * n_assets, dtype=np.uint64).reshape(
        n_base, n_dates, n_assets
    )
    draws = _standard_normals(seed, counters)
    if antithetic:
        z = np.empty((n_paths, n_dates, n_assets))
        z[0::2] = draws
        z[1::2] = -draws
    else:
        z = draws

    dt = np.diff(np.concatenate([[0.0], schedule.times]))
    drift = (model.rate - model.dividend[None, :] - 0.5 * model.vol[None, :] ** 2) * dt[:, None]
    scale = model.vol[None, :] * np.sqrt(dt)[:, None]
    increments = drift[None, :, :] + scale[None, :, :] * (z @ chol.T)
    values = model.spot[None, None, :] * np.exp(np.cumsum(increments, axis=1))
    return PathSet(
        values=values,
        times=schedule.times,
        rate=model.rate,
        seed=int(seed),
        antithetic=antithetic,
        pool_offset=0,
    )


def split_pool(pool: PathSet, n_sets: int) -> list[PathSet]:
    """Split a path pool into n_sets contiguous, disjoint blocks.

    Block k carries pool_offset = k * (N / n_sets); antithetic pairs never
    straddle a block boundary.  Blocks are views into the parent array.
    """
    if n_sets < 1:
        raise ValueError("n_sets must be positive")
    if pool.n_paths % n_sets != 0:
        raise ValueError(f"{n_sets} does not divide the pool size {pool.n_paths}")
    block = pool.n_paths // n_sets
    if pool.antithetic and block % 2 != 0:
        raise ValueError("split would break antithetic pairs across a boundary")
    return [
        PathSet(
            values=pool.values[k * block : (k + 1) * block],
            times=pool.times,
            rate=pool.rate,
            seed=pool.seed,
            antithetic=pool.antithetic,
            pool_offset=pool.pool_offset + k * block,
        )
        for k in range(n_sets)
    ]


def dump_paths(paths: PathSet, filename: str) -> None:
    """Write a PathSet to disk.

    Layout (little-endian): int64 n_paths, int64 n_dates, int64 n_assets,
    uint64 seed, int64 antithetic flag (0/1), then n_paths * n_dates * n_assets
    float64 values in row-major (path, date, asset) order.  Schedule times and
    rate are not stored; the loader takes them as arguments.
    """
    with open(filename, "wb") as f:
        f.write(
            _DUMP_HEADER.pack(
                paths.n_paths,
                paths.n_dates,
                paths.n_assets,
                paths.seed & 0xFFFFFFFFFFFFFFFF,
                int(paths.antithetic),
            )
        )
        f.write(np.ascontiguousarray(paths.values, dtype="<f8").tobytes())


def load_paths(filename: str, times: np.ndarray, rate: float) -> PathSet:
    """Read a PathSet written by dump_paths; times/rate must match the generating run."""
    with open(filename, "rb") as f:
        header = f.read(_DUMP_HEADER.size)
        n_paths, n_dates, n_assets, seed, anti = _DUMP_HEADER.unpack(header)
        raw = np.frombuffer(f.read(), dtype="<f8")
    expected = n_paths * n_dates * n_assets
    if raw.size != expected:
        raise ValueError(f"path dump has {raw.size} values, header promises {expected}")
    times = np.asarray(times, dtype=float)
    if times.shape != (n_dates,):
        raise ValueError(f"schedule has {times.shape[0]} dates, dump has {n_dates}")
    return PathSet(
        values=raw.reshape(n_paths, n_dates, n_assets).copy(),
        times=times,
        rate=float(rate),
        seed=int(seed),
        antithetic=bool(anti),
        pool_offset=0,
    )
