"""Experiment orchestration: estimator comparisons, bias convergence, CSV reports.

Experiment 1 prices a grid of contracts with the classical, two-pass, and
leave-one-out estimators on shared valuation paths, n_mc independent times,
and reports price offsets against the reference table plus per-estimator
differences from the classical price.  Experiment 2 splits one path pool into
progressively smaller sets and measures look-ahead bias (classical minus
leave-one-out price) as a function of the regressors-to-paths ratio, ending
with a weighted straight-line fit.

Seeds derive from the base seed by hashing the run coordinates, so every
simulation set has its own reproducible stream and no two runs collide.
"""

from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .contracts import (
    BASKET_CALL,
    BESTOF_CALL,
    PAYOFF_KINDS,
    PUT_SINGLE,
    PayoffSpec,
    basis_family,
)
from .engine import (
    MODE_EUROPEAN,
    MODE_LOOLSM,
    MODE_LSM,
    MODE_LSM2,
    apply_control_variate,
    european_mc_price,
    price_backward,
    price_two_pass,
)
from .errors import ConfigError
from .market import GbmModel, generate_paths, split_pool, uniform_schedule
from .oracles import bestof2_european_call, bs_european_put, reference_price

_MASK64 = 0xFFFFFFFFFFFFFFFF

CSV_COLUMNS = (
    "case,key,estimator,M,N,n_mc,mean_offset,std,se_mean,"
    "mean_bias,bias_se,flips_total,min_rank,wall_ms"
)

_CASE_DEFAULTS: dict[str, dict] = {
    PUT_SINGLE: dict(
        keys=(80.0, 90.0, 100.0, 110.0, 120.0),
        spot=100.0,
        strike=100.0,
        rate=0.05,
        dividend=0.02,
        vol=0.20,
        correlation=0.0,
        n_dates=5,
        maturity=1.0,
        basis_m=5,
        m_list=(4, 8, 12),
    ),
    BESTOF_CALL: dict(
        keys=(90.0, 100.0, 110.0),
        spot=100.0,
        strike=100.0,
        rate=0.05,
        dividend=0.10,
        vol=0.20,
        correlation=0.0,
        n_dates=9,
        maturity=3.0,
        basis_m=11,
        m_list=(4, 7, 11),
    ),
    BASKET_CALL: dict(
        keys=(60.0, 80.0, 100.0, 120.0, 140.0),
        spot=100.0,
        strike=100.0,
        rate=0.0,
        dividend=0.0,
        vol=0.40,
        correlation=0.5,
        n_dates=10,
        maturity=5.0,
        basis_m=16,
        m_list=(6, 10, 16),
    ),
}

_SCALE_EXP1 = {"desk": dict(n_paths=10_000, n_mc=20), "paper": dict(n_paths=40_000, n_mc=100)}
_SCALE_EXP2 = {
    "desk": dict(pool_size=144_000, n_mc_list=(10, 40, 120)),
    "paper": dict(pool_size=1_440_000, n_mc_list=(10, 20, 30, 40, 60, 120, 240, 720)),
}

_N_ASSETS = {PUT_SINGLE: 1, BESTOF_CALL: 2, BASKET_CALL: 4}


def derive_seed(base_seed: int, *parts) -> int:
    """Deterministic 64-bit stream seed for one run coordinate.

    XORs the base seed with a stable hash of the coordinate parts, so distinct
    coordinates get distinct, reproducible streams without coordination.
    """
    tag = "|".join(str(p) for p in parts).encode()
    h = int.from_bytes(hashlib.blake2b(tag, digest_size=8).digest(), "little")
    return (base_seed ^ h) & _MASK64


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment run; see default_config for the shipped values.

    keys holds strikes for put_single/basket_call and common spots for
    bestof_call (where `strike` then fixes the contract strike).  Scalar model
    parameters apply to every asset of the case.
    """

    case: str
    keys: tuple[float, ...]
    spot: float
    strike: float
    rate: float
    dividend: float
    vol: float
    correlation: float
    n_dates: int
    maturity: float
    estimators: tuple[str, ...] = (MODE_LSM, MODE_LSM2, MODE_LOOLSM)
    n_paths: int = 40_000
    n_mc: int = 100
    basis_m: int = 5
    m_list: tuple[int, ...] = (4, 8, 12)
    n_mc_list: tuple[int, ...] = (10, 40, 120)
    pool_size: int = 144_000
    base_seed: int = 20170907
    antithetic: bool = True
    control_variate: bool = False
    threads: int = 1
    out: str | None = None

    def __post_init__(self) -> None:
        if self.case not in PAYOFF_KINDS:
            raise ConfigError(f"unknown case {self.case!r}; expected one of {PAYOFF_KINDS}")
        if not self.keys:
            raise ConfigError("at least one strike/spot key is required")
        bad = [e for e in self.estimators if e not in (MODE_LSM, MODE_LSM2, MODE_LOOLSM)]
        if bad or not self.estimators:
            raise ConfigError(f"estimators must be a non-empty subset of LSM/LSM2/LOOLSM, got {bad}")
        if self.antithetic and self.n_paths % 2 != 0:
            raise ConfigError("n_paths must be even under antithetic sampling")
        for n_mc in self.n_mc_list:
            if self.pool_size % n_mc != 0:
                raise ConfigError(f"pool_size {self.pool_size} is not divisible by n_mc {n_mc}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    @property
    def n_assets(self) -> int:
        return _N_ASSETS[self.case]

    def schedule(self):
        return uniform_schedule(self.n_dates, self.maturity)

    def model_for_key(self, key: float) -> GbmModel:
        j = self.n_assets
        spot = key if self.case == BESTOF_CALL else self.spot
        corr = np.full((j, j), self.correlation)
        np.fill_diagonal(corr, 1.0)
        return GbmModel(
            spot=np.full(j, float(spot)),
            rate=self.rate,
            dividend=np.full(j, self.dividend),
            vol=np.full(j, self.vol),
            correlation=corr,
        )

    def payoff_for_key(self, key: float) -> PayoffSpec:
        strike = self.strike if self.case == BESTOF_CALL else key
        return PayoffSpec(kind=self.case, strike=float(strike))


def default_config(case: str, experiment: int = 1, scale: str = "desk") -> ExperimentConfig:
    """Shipped configuration for a case: contract and model parameters are the
    benchmark values of the three studies; scale picks CI-friendly ("desk") or
    full ("paper") simulation sizes."""
    if case not in _CASE_DEFAULTS:
        raise ConfigError(f"unknown case {case!r}; expected one of {PAYOFF_KINDS}")
    if scale not in _SCALE_EXP1:
        raise ConfigError(f"unknown scale {scale!r}; expected desk or paper")
    kwargs = dict(_CASE_DEFAULTS[case])
    kwargs.update(_SCALE_EXP1[scale])
    kwargs.update(_SCALE_EXP2[scale])
    if experiment == 2:
        kwargs["keys"] = (100.0,)
        kwargs["control_variate"] = True
    return ExperimentConfig(case=case, **kwargs)


_BOOL_KEYS = {"antithetic", "control_variate"}
_INT_KEYS = {"n_dates", "n_paths", "n_mc", "basis_m", "pool_size", "base_seed", "threads"}
_FLOAT_KEYS = {"spot", "strike", "rate", "dividend", "vol", "correlation", "maturity"}
_FLOAT_LIST_KEYS = {"keys"}
_INT_LIST_KEYS = {"m_list", "n_mc_list"}
_STR_LIST_KEYS = {"estimators"}
_STR_KEYS = {"case", "out"}


def parse_config_text(text: str) -> dict:
    """Parse `key = value` lines into typed ExperimentConfig overrides.

    Lists are comma separated; booleans accept true/false; '#' starts a
    comment.  Unknown keys are rejected.
    """
    overrides: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            if key in _BOOL_KEYS:
                if value.lower() not in ("true", "false"):
                    raise ValueError("expected true or false")
                overrides[key] = value.lower() == "true"
            elif key in _INT_KEYS:
                overrides[key] = int(value)
            elif key in _FLOAT_KEYS:
                overrides[key] = float(value)
            elif key in _FLOAT_LIST_KEYS:
                overrides[key] = tuple(float(v) for v in value.split(","))
            elif key in _INT_LIST_KEYS:
                overrides[key] = tuple(int(v) for v in value.split(","))
            elif key in _STR_LIST_KEYS:
                overrides[key] = tuple(v.strip() for v in value.split(","))
            elif key in _STR_KEYS:
                overrides[key] = value
            else:
                raise ValueError("unknown key")
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: {key} = {value!r}: {exc}") from None
    return overrides


def load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as f:
        return parse_config_text(f.read())


@dataclass(frozen=True)
class ReportRow:
    """One (configuration, estimator) cell of an experiment report.

    mean_bias holds the estimator-minus-classical price difference in
    experiment 1 and the classical-minus-leave-one-out look-ahead bias in
    experiment 2; it is NaN where undefined (European rows, the classical
    estimator's own row in experiment 1, single-set runs).
    """

    case: str
    key: float
    estimator: str
    m: int
    n_paths: int
    n_mc: int
    mean_offset: float
    std: float
    se_mean: float
    mean_bias: float
    bias_se: float
    flips_total: int
    min_rank: int
    wall_ms: float


@dataclass(frozen=True)
class SlopeFit:
    """Weighted straight-line fit of mean bias against M/N.

    Parameter errors follow the polyfit convention: the covariance from the
    supplied weights is scaled by the reduced chi-square of the fit.
    """

    slope: float
    intercept: float
    r2: float
    slope_se: float
    intercept_se: float
    n_points: int


@dataclass
class ExperimentReport:
    rows: list[ReportRow] = field(default_factory=list)
    slope: SlopeFit | None = None
    meta: dict = field(default_factory=dict)

    def fingerprint(self) -> bytes:
        """CSV bytes with wall-clock timings zeroed; equal for identical runs."""
        return csv_text(self, zero_wall=True).encode()


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if not math.isfinite(v):
        return ""
    return f"{v:.10g}"


def csv_text(report: ExperimentReport, zero_wall: bool = False) -> str:
    lines = [CSV_COLUMNS]
    for row in report.rows:
        wall = 0.0 if zero_wall else row.wall_ms
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    row.case,
                    row.key,
                    row.estimator,
                    row.m,
                    row.n_paths,
                    row.n_mc,
                    row.mean_offset,
                    row.std,
                    row.se_mean,
                    row.mean_bias,
                    row.bias_se,
                    row.flips_total,
                    row.min_rank,
                    wall,
                )
            )
        )
    return "\n".join(lines) + "\n"


def emit_csv(report: ExperimentReport, path: str) -> None:
    """Write the report rows as UTF-8 CSV, one record per configuration cell."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(csv_text(report))
    except OSError as exc:
        raise OSError(f"cannot write report to {path!r}: {exc}") from exc


def read_csv(path: str) -> list[dict]:
    """Parse a report CSV back into dictionaries (empty fields become NaN)."""
    with open(path, encoding="utf-8") as f:
        lines = [line.rstrip("\n") for line in f if line.strip()]
    if not lines or lines[0] != CSV_COLUMNS:
        raise ValueError(f"{path!r} does not start with the report header")
    names = CSV_COLUMNS.split(",")
    out = []
    for line in lines[1:]:
        values = line.split(",")
        rec: dict = dict(zip(names, values))
        for name in ("key", "mean_offset", "std", "se_mean", "mean_bias", "bias_se", "wall_ms"):
            rec[name] = float(rec[name]) if rec[name] else float("nan")
        for name in ("M", "N", "n_mc", "flips_total", "min_rank"):
            rec[name] = int(rec[name])
        out.append(rec)
    return out


def _spread(values: np.ndarray) -> tuple[float, float]:
    """Sample standard deviation (with the n/(n-1) correction) and its SE of mean."""
    n = values.size
    if n < 2:
        return float("nan"), float("nan")
    std = float(values.std(ddof=1))
    return std, std / math.sqrt(n)


def _map_sets(worker, n_sets: int, threads: int) -> list:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, range(n_sets)))
    return [worker(k) for k in range(n_sets)]


def _exact_european(config: ExperimentConfig, key: float) -> float:
    if config.case == PUT_SINGLE:
        return bs_european_put(
            config.spot, config.vol, config.rate, config.dividend, key, config.maturity
        )
    if config.case == BESTOF_CALL:
        return bestof2_european_call(config.model_for_key(key), config.strike, config.maturity)
    return reference_price(config.case, key).european


def run_experiment1(config: ExperimentConfig) -> ExperimentReport:
    """Estimator comparison on n_mc independent simulation sets per grid key.

    All requested estimators value the same paths within a set (the two-pass
    estimator fits its policy on an extra, disjoint set), so per-set price
    differences isolate the exercise decision.  The optional control variate
    shifts every Bermudan estimate by the European pricing error of the set;
    it changes no expectation and cancels exactly in the difference columns.
    """
    schedule = config.schedule()
    basis = basis_family(config.case, config.basis_m)
    report = ExperimentReport(
        meta={
            "experiment": "1",
            "case": config.case,
            "base_seed": str(config.base_seed),
            "control_variate": str(config.control_variate).lower(),
            "basis": " ".join(basis.labels),
        }
    )

    for key in config.keys:
        model = config.model_for_key(key)
        payoff = config.payoff_for_key(key)
        try:
            ref = reference_price(config.case, key)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
        exact_euro = _exact_european(config, key)

        def run_set(k: int, _model=model, _payoff=payoff, _exact=exact_euro):
            paths = generate_paths(
                _model, schedule, config.n_paths, derive_seed(config.base_seed, config.case, k),
                config.antithetic,
            )
            t0 = time.perf_counter()
            euro = european_mc_price(paths, _payoff)
            euro_ms = (time.perf_counter() - t0) * 1e3
            cell: dict = {"EUROPEAN": (euro.price, 0, 0, euro_ms)}
            for estimator in config.estimators:
                t0 = time.perf_counter()
                if estimator == MODE_LSM2:
                    policy_paths = generate_paths(
                        _model,
                        schedule,
                        config.n_paths,
                        derive_seed(config.base_seed, config.case, k, "policy"),
                        config.antithetic,
                    )
                    result = price_two_pass(policy_paths, paths, _payoff, basis)
                else:
                    result, _ = price_backward(paths, _payoff, basis, estimator)
                if config.control_variate:
                    result = apply_control_variate(result, _exact, euro)
                wall = (time.perf_counter() - t0) * 1e3
                cell[estimator] = (
                    result.price,
                    sum(result.flip_counts),
                    min(result.ranks),
                    wall,
                )
            return cell

        cells = _map_sets(run_set, config.n_mc, config.threads)
        lsm_prices = (
            np.array([c[MODE_LSM][0] for c in cells]) if MODE_LSM in config.estimators else None
        )
        for estimator in config.estimators:
            prices = np.array([c[estimator][0] for c in cells])
            offsets = prices - ref.bermudan
            std, se = _spread(offsets)
            if estimator != MODE_LSM and lsm_prices is not None:
                diffs = prices - lsm_prices
                bias, (_, bias_se) = float(diffs.mean()), _spread(diffs)
            else:
                bias, bias_se = float("nan"), float("nan")
            report.rows.append(
                ReportRow(
                    case=config.case,
                    key=key,
                    estimator=estimator,
                    m=config.basis_m,
                    n_paths=config.n_paths,
                    n_mc=config.n_mc,
                    mean_offset=float(offsets.mean()),
                    std=std,
                    se_mean=se,
                    mean_bias=bias,
                    bias_se=bias_se,
                    flips_total=int(sum(c[estimator][1] for c in cells)),
                    min_rank=int(min(c[estimator][2] for c in cells)),
                    wall_ms=float(sum(c[estimator][3] for c in cells)),
                )
            )
        euro_prices = np.array([c["EUROPEAN"][0] for c in cells])
        euro_offsets = euro_prices - ref.european
        std, se = _spread(euro_offsets)
        report.rows.append(
            ReportRow(
                case=config.case,
                key=key,
                estimator=MODE_EUROPEAN,
                m=0,
                n_paths=config.n_paths,
                n_mc=config.n_mc,
                mean_offset=float(euro_offsets.mean()),
                std=std,
                se_mean=se,
                mean_bias=float("nan"),
                bias_se=float("nan"),
                flips_total=0,
                min_rank=0,
                wall_ms=float(sum(c["EUROPEAN"][3] for c in cells)),
            )
        )
    return report


def run_experiment2(config: ExperimentConfig) -> ExperimentReport:
    """Look-ahead bias as a function of M/N on nested splits of one path pool.

    One pool is generated once and shared across every basis size, then split
    into n_mc contiguous sets for each entry of n_mc_list; this controls the
    Monte Carlo variance across set sizes.  Per set, bias is the classical
    price minus the leave-one-out price on identical paths; offsets use the
    European control variate when enabled (the bias is unaffected by it).
    The report carries a weighted straight-line fit of mean bias against M/N.
    """
    if len(config.keys) != 1:
        raise ConfigError("experiment 2 runs one strike/spot at a time")
    key = config.keys[0]
    schedule = config.schedule()
    model = config.model_for_key(key)
    payoff = config.payoff_for_key(key)
    try:
        ref = reference_price(config.case, key)
    except KeyError as exc:
        raise ConfigError(str(exc)) from None
    exact_euro = _exact_european(config, key)
    pool_seed = derive_seed(config.base_seed, config.case, "pool")
    pool = generate_paths(model, schedule, config.pool_size, pool_seed, config.antithetic)

    report = ExperimentReport(
        meta={
            "experiment": "2",
            "case": config.case,
            "key": _fmt(key),
            "base_seed": str(config.base_seed),
            "pool_seed": str(pool_seed),
            "pool_size": str(config.pool_size),
            "pool_shared_across_m": "true",
            "control_variate": str(config.control_variate).lower(),
        }
    )
    points: list[tuple[float, float, float]] = []
    for m in config.m_list:
        basis = basis_family(config.case, m)
        if config.case == BASKET_CALL:
            report.meta[f"basis_m{m}"] = " ".join(basis.labels)
        for n_mc in config.n_mc_list:
            sets = split_pool(pool, n_mc)
            n_per_set = sets[0].n_paths

            def run_set(k: int, _sets=sets, _basis=basis):
                paths = _sets[k]
                t0 = time.perf_counter()
                lsm, _ = price_backward(paths, payoff, _basis, MODE_LSM)
                loo, _ = price_backward(paths, payoff, _basis, MODE_LOOLSM)
                wall = (time.perf_counter() - t0) * 1e3
                bias = lsm.price - loo.price
                if config.control_variate:
                    euro = european_mc_price(paths, payoff)
                    lsm = apply_control_variate(lsm, exact_euro, euro)
                    loo = apply_control_variate(loo, exact_euro, euro)
                return {
                    MODE_LSM: (lsm.price, sum(lsm.flip_counts), min(lsm.ranks), wall / 2),
                    MODE_LOOLSM: (loo.price, sum(loo.flip_counts), min(loo.ranks), wall / 2),
                    "bias": bias,
                }

            cells = _map_sets(run_set, n_mc, config.threads)
            biases = np.array([c["bias"] for c in cells])
            bias_mean = float(biases.mean())
            _, bias_se = _spread(biases)
            for estimator in (MODE_LSM, MODE_LOOLSM):
                prices = np.array([c[estimator][0] for c in cells])
                offsets = prices - ref.bermudan
                std, se = _spread(offsets)
                report.rows.append(
                    ReportRow(
                        case=config.case,
                        key=key,
                        estimator=estimator,
                        m=m,
                        n_paths=n_per_set,
                        n_mc=n_mc,
                        mean_offset=float(offsets.mean()),
                        std=std,
                        se_mean=se,
                        mean_bias=bias_mean,
                        bias_se=bias_se,
                        flips_total=int(sum(c[estimator][1] for c in cells)),
                        min_rank=int(min(c[estimator][2] for c in cells)),
                        wall_ms=float(sum(c[estimator][3] for c in cells)),
                    )
                )
            if n_mc >= 2 and math.isfinite(bias_se) and bias_se > 0.0:
                points.append((m / n_per_set, bias_mean, 1.0 / bias_se**2))

    if len(points) >= 3:
        report.slope = fit_bias_slope(points)
    return report


def fit_bias_slope(points: list[tuple[float, float, float]]) -> SlopeFit:
    """Weighted least-squares line y = slope * x + intercept through the points.

    Each point is (x, y, w) with w the inverse variance of y.  The parameter
    covariance is (A' W A)^-1 scaled by the reduced chi-square, and r2 is the
    weighted coefficient of determination.
    """
    if len(points) < 3:
        raise ValueError(f"need at least 3 points to fit a slope, got {len(points)}")
    x = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    w = np.array([p[2] for p in points], dtype=float)
    if not (np.isfinite(x).all() and np.isfinite(y).all() and np.isfinite(w).all()):
        raise ValueError("slope points must be finite")
    if (w <= 0.0).any():
        raise ValueError("weights must be strictly positive")
    if np.ptp(x) == 0.0:
        raise ValueError("all x values identical; slope is undefined")

    a = np.column_stack([x, np.ones_like(x)])
    cov_unscaled = np.linalg.inv(a.T @ (w[:, None] * a))
    coef = cov_unscaled @ (a.T @ (w * y))
    resid = y - a @ coef
    chi2 = float(np.sum(w * resid**2))
    dof = len(points) - 2
    cov = cov_unscaled * (chi2 / dof if dof > 0 else 0.0)

    y_bar = float(np.sum(w * y) / np.sum(w))
    ss_tot = float(np.sum(w * (y - y_bar) ** 2))
    r2 = 1.0 - chi2 / ss_tot if ss_tot > 0.0 else 1.0
    return SlopeFit(
        slope=float(coef[0]),
        intercept=float(coef[1]),
        r2=r2,
        slope_se=float(np.sqrt(cov[0, 0])),
        intercept_se=float(np.sqrt(cov[1, 1])),
        n_points=len(points),
    )


def apply_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """New config with the given fields replaced; unknown fields are rejected."""
    valid = set(config.__dataclass_fields__)
    bad = sorted(set(overrides) - valid)
    if bad:
        raise ConfigError(f"unknown config fields: {bad}")
    return replace(config, **overrides)
