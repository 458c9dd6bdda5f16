"""Backward-induction pricing: classical, leave-one-out, and two-pass estimators.

All payouts are discounted to valuation time 0 before the induction, so the
path value vector V needs no re-discounting between dates.  Every regression
uses all simulation paths with the payoff among the regressors; exercise at
maturity is forced and exercise at time 0 is forbidden.  The leave-one-out
estimator differs from the classical one only in which prediction enters the
exercise decision.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .contracts import BasisSpec, PayoffSpec, design_matrix, discounted_payout
from .errors import NumericalError
from .market import PathSet
from .regression import fit_least_squares, loo_fallback_mask

MODE_LSM = "LSM"
MODE_LOOLSM = "LOOLSM"
MODE_LSM2 = "LSM2"
MODE_EUROPEAN = "EUROPEAN"


@dataclass(frozen=True, eq=False)
class PricingResult:
    """One price estimate with its per-path decomposition and diagnostics.

    price is always the mean of per_path_value.  ranks and flip_counts have
    one entry per regression date (t_1 .. t_{I-1}, chronological); maturity
    carries no regression.  flip_counts counts paths whose exercise decision
    differs between the full-fit and leave-one-out predictions at that date,
    whichever of the two drove this run.  fallback_count totals leverage-one
    fallbacks across dates.
    """

    price: float
    per_path_value: np.ndarray
    std_error: float
    mode: str
    ranks: tuple[int, ...]
    fallback_count: int
    flip_counts: tuple[int, ...]
    provenance: tuple
    antithetic: bool


@dataclass(frozen=True, eq=False)
class ExercisePolicy:
    """Regression coefficients per exercise date t_1 .. t_{I-1}, plus their basis."""

    coefficients: tuple[np.ndarray, ...]
    basis: BasisSpec


@dataclass(frozen=True, eq=False)
class DateTrace:
    """Per-date regression internals, recorded when a trace list is supplied."""

    date_index: int
    payout: np.ndarray
    response: np.ndarray
    fitted: np.ndarray
    loo_fitted: np.ndarray
    leverage: np.ndarray
    rank: int


@dataclass(frozen=True, eq=False)
class BiasStats:
    """Look-ahead bias measured as the classical-minus-leave-one-out difference."""

    mean: float
    per_path: np.ndarray
    std_error: float


def decide_continue(z: float, c: float, nonnegative: bool) -> bool:
    """True when the option is held past the date.

    Continuation wins ties (c == z), and a zero payout on a non-negative
    claim always continues: a negative fitted continuation value there is a
    regression artifact, never a reason to exercise worthless paths.
    """
    return bool(c >= z or (nonnegative and z == 0.0))


def _continue_mask(z: np.ndarray, c: np.ndarray, nonnegative: bool) -> np.ndarray:
    mask = c >= z
    if nonnegative:
        mask |= z == 0.0
    return mask


def _payout_matrix(paths: PathSet, payoff: PayoffSpec) -> np.ndarray:
    if paths.n_assets != payoff.n_assets:
        raise ValueError(
            f"{payoff.kind} expects {payoff.n_assets} asset(s), paths carry {paths.n_assets}"
        )
    z = np.empty((paths.n_paths, paths.n_dates))
    for i, t in enumerate(paths.times):
        z[:, i] = discounted_payout(payoff, paths.values[:, i, :], float(t), paths.rate)
    return z


def _std_error(per_path: np.ndarray, antithetic: bool) -> float:
    """Standard error of the mean; antithetic pairs are dependent, so the
    estimate is taken over the N/2 pair averages."""
    if antithetic:
        pairs = per_path.reshape(-1, 2).mean(axis=1)
        n = pairs.shape[0]
        return float(pairs.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    n = per_path.shape[0]
    return float(per_path.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")


def price_backward(
    paths: PathSet,
    payoff: PayoffSpec,
    basis: BasisSpec,
    mode: str,
    trace: list[DateTrace] | None = None,
) -> tuple[PricingResult, ExercisePolicy]:
    """Backward-induction price under the classical or leave-one-out estimator.

    Starting from the maturity payout, each earlier exercise date regresses
    the path value vector on the basis over all paths and replaces the value
    with the payout wherever the decision prediction (the fitted value for
    MODE_LSM, its leave-one-out correction for MODE_LOOLSM) falls below it.
    Returns the price result and the fitted exercise policy.
    """
    if mode not in (MODE_LSM, MODE_LOOLSM):
        raise ValueError(f"mode must be {MODE_LSM} or {MODE_LOOLSM}, got {mode!r}")
    if basis.case != payoff.kind:
        raise ValueError(f"basis built for {basis.case!r}, payoff is {payoff.kind!r}")
    if paths.n_paths <= basis.m:
        warnings.warn(
            f"{paths.n_paths} paths for {basis.m} regressors; estimates will be unstable",
            RuntimeWarning,
            stacklevel=2,
        )

    z = _payout_matrix(paths, payoff)
    n_dates = paths.n_dates
    value = z[:, -1].copy()
    betas: list[np.ndarray] = [None] * (n_dates - 1)  # type: ignore[list-item]
    ranks = np.zeros(n_dates - 1, dtype=int)
    flips = np.zeros(n_dates - 1, dtype=int)
    fallbacks = 0

    for i in range(n_dates - 2, -1, -1):
        zi = z[:, i]
        x = design_matrix(basis, paths.values[:, i, :], zi)
        fit = fit_least_squares(x, value)
        if fit.rank == 0:
            raise NumericalError(f"rank-zero regression at exercise date index {i}")
        fallback = loo_fallback_mask(fit)
        denom = np.where(fallback, 1.0, 1.0 - fit.leverage)
        c_loo = np.where(
            fallback, fit.fitted, fit.fitted - fit.leverage * fit.residuals / denom
        )
        fallbacks += int(fallback.sum())

        keep_full = _continue_mask(zi, fit.fitted, payoff.nonnegative)
        keep_loo = _continue_mask(zi, c_loo, payoff.nonnegative)
        flips[i] = int(np.count_nonzero(keep_full != keep_loo))
        keep = keep_loo if mode == MODE_LOOLSM else keep_full
        if trace is not None:
            trace.append(
                DateTrace(
                    date_index=i,
                    payout=zi.copy(),
                    response=value.copy(),
                    fitted=fit.fitted,
                    loo_fitted=c_loo,
                    leverage=fit.leverage,
                    rank=fit.rank,
                )
            )
        value = np.where(keep, value, zi)
        betas[i] = fit.beta
        ranks[i] = fit.rank

    result = PricingResult(
        price=float(value.mean()),
        per_path_value=value,
        std_error=_std_error(value, paths.antithetic),
        mode=mode,
        ranks=tuple(int(r) for r in ranks),
        fallback_count=fallbacks,
        flip_counts=tuple(int(f) for f in flips),
        provenance=paths.provenance,
        antithetic=paths.antithetic,
    )
    return result, ExercisePolicy(coefficients=tuple(betas), basis=basis)


def price_two_pass(
    policy_paths: PathSet,
    valuation_paths: PathSet,
    payoff: PayoffSpec,
    basis: BasisSpec,
) -> PricingResult:
    """Two-pass estimate: fit the policy on one path set, value it on another.

    The exercise policy comes from a classical backward pass on policy_paths;
    its per-date coefficients are then applied to valuation_paths, so the
    decision is independent of the valued payoffs whenever the two sets are
    disjoint.  Sharing one set is tolerated (it degenerates to the classical
    estimator) but defeats the purpose.
    """
    if policy_paths.n_dates != valuation_paths.n_dates or not np.array_equal(
        policy_paths.times, valuation_paths.times
    ):
        raise ValueError("policy and valuation path sets must share the exercise schedule")
    if policy_paths.rate != valuation_paths.rate:
        raise ValueError("policy and valuation path sets must share the discount rate")

    policy_result, policy = price_backward(policy_paths, payoff, basis, MODE_LSM)
    z = _payout_matrix(valuation_paths, payoff)
    value = z[:, -1].copy()
    for i in range(valuation_paths.n_dates - 2, -1, -1):
        zi = z[:, i]
        x = design_matrix(basis, valuation_paths.values[:, i, :], zi)
        c = x @ policy.coefficients[i]
        keep = _continue_mask(zi, c, payoff.nonnegative)
        value = np.where(keep, value, zi)

    return PricingResult(
        price=float(value.mean()),
        per_path_value=value,
        std_error=_std_error(value, valuation_paths.antithetic),
        mode=MODE_LSM2,
        ranks=policy_result.ranks,
        fallback_count=0,
        flip_counts=tuple(0 for _ in policy_result.flip_counts),
        provenance=valuation_paths.provenance,
        antithetic=valuation_paths.antithetic,
    )


def european_mc_price(paths: PathSet, payoff: PayoffSpec) -> PricingResult:
    """Monte Carlo price of the European contract: mean discounted maturity payout."""
    zt = discounted_payout(
        payoff, paths.values[:, -1, :], float(paths.times[-1]), paths.rate
    )
    zt = np.asarray(zt)
    return PricingResult(
        price=float(zt.mean()),
        per_path_value=zt,
        std_error=_std_error(zt, paths.antithetic),
        mode=MODE_EUROPEAN,
        ranks=(),
        fallback_count=0,
        flip_counts=(),
        provenance=paths.provenance,
        antithetic=paths.antithetic,
    )


def apply_control_variate(
    result: PricingResult, exact_euro: float, mc_euro: PricingResult
) -> PricingResult:
    """Shift a result by the known European pricing error on the same paths.

    Path n moves by exact_euro - mc_euro.per_path_value[n], so the mean moves
    by exact_euro - mc_euro.price and the spread of the estimator shrinks by
    the correlation between the two payouts.  Differences between two results
    adjusted with the same European run cancel exactly.
    """
    if result.provenance != mc_euro.provenance:
        raise ValueError("control variate must be priced on the same path set as the result")
    per_path = result.per_path_value + (exact_euro - mc_euro.per_path_value)
    return PricingResult(
        price=float(per_path.mean()),
        per_path_value=per_path,
        std_error=_std_error(per_path, result.antithetic),
        mode=result.mode,
        ranks=result.ranks,
        fallback_count=result.fallback_count,
        flip_counts=result.flip_counts,
        provenance=result.provenance,
        antithetic=result.antithetic,
    )


def lookahead_bias(lsm: PricingResult, loolsm: PricingResult) -> BiasStats:
    """Per-path and mean price difference between the classical and LOO runs."""
    if lsm.provenance != loolsm.provenance:
        raise ValueError("bias requires both results from the same path set")
    per_path = lsm.per_path_value - loolsm.per_path_value
    return BiasStats(
        mean=float(per_path.mean()),
        per_path=per_path,
        std_error=_std_error(per_path, lsm.antithetic),
    )
