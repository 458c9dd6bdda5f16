"""Linear least squares with leverage scores and closed-form leave-one-out predictions.

The solver is SVD-based and column-equilibrated: each column of the design
matrix is scaled to unit Euclidean norm before factorization, which leaves the
column space (and hence fitted values, residuals and leverage) unchanged while
making the numerical-rank decision meaningful for raw polynomial regressors
whose columns span many orders of magnitude.  Leverage is computed row-wise
from the orthonormal factor, never by forming the N x N projector.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

# 1 - h below this threshold is treated as a leverage-one singularity: the
# leave-one-out prediction falls back to the full-fit value for that row.
LEVERAGE_EPS = 1e-10


def _first_nonfinite(a: np.ndarray) -> tuple[int, ...]:
    return tuple(int(i) for i in np.argwhere(~np.isfinite(a))[0])


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """N x M regressor matrix whose first column is the intercept of ones.

    values[n, m] is the m-th basis function evaluated on sample n.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"design matrix must be 2-d and non-empty, got shape {v.shape}")
        if not np.isfinite(v).all():
            i, j = _first_nonfinite(v)
            raise ValueError(f"non-finite design entry at row {i}, column {j}")
        if not np.array_equal(v[:, 0], np.ones(v.shape[0])):
            raise ValueError("first design column must be identically 1")
        object.__setattr__(self, "values", v)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_terms(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class RegressionFit:
    """Result of one least-squares fit.

    beta      coefficient vector (length M)
    fitted    projection of the response onto the column space (C = H y)
    residuals y - fitted
    leverage  diagonal of the projector H, clipped to [0, 1]
    rank      numerical rank of the design matrix
    """

    beta: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    leverage: np.ndarray
    rank: int


def fit_least_squares(X: DesignMatrix | np.ndarray, y: np.ndarray) -> RegressionFit:
    """Least-squares fit of y on the columns of X.

    Singular values of the column-equilibrated matrix below
    max(N, M) * eps * sigma_max are treated as zero; directions below the
    threshold are dropped, so rank-deficient systems (e.g. a payoff column
    that is an exact linear combination of price columns) are handled
    deterministically.  When the fit is rank deficient, beta is the residual
    minimizer with the smallest norm in the column-equilibrated basis.

    Raises ValueError on non-finite input, naming the offending entry.
    """
    if isinstance(X, DesignMatrix):
        X = X.values
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"design matrix must be 2-d, got shape {X.shape}")
    n, m = X.shape
    if n < 1 or m < 1:
        raise ValueError(f"design matrix must be non-empty, got shape {X.shape}")
    if y.shape != (n,):
        raise ValueError(f"response must have shape ({n},), got {y.shape}")
    if not np.isfinite(X).all():
        i, j = _first_nonfinite(X)
        raise ValueError(f"non-finite design entry at row {i}, column {j}")
    if not np.isfinite(y).all():
        (i,) = _first_nonfinite(y)
        raise ValueError(f"non-finite response at row {i}")

    norms = np.linalg.norm(X, axis=0)
    norms = np.where(norms > 0.0, norms, 1.0)
    u, s, vt = np.linalg.svd(X / norms, full_matrices=False)
    tol = max(n, m) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.count_nonzero(s > tol))

    uy = u[:, :rank].T @ y
    beta = (vt[:rank].T @ (uy / s[:rank])) / norms
    fitted = u[:, :rank] @ uy
    leverage = np.minimum(np.einsum("ij,ij->i", u[:, :rank], u[:, :rank]), 1.0)
    return RegressionFit(
        beta=beta,
        fitted=fitted,
        residuals=y - fitted,
        leverage=leverage,
        rank=rank,
    )


def loo_fallback_mask(fit: RegressionFit) -> np.ndarray:
    """Rows whose leverage is within LEVERAGE_EPS of 1 (LOO prediction undefined)."""
    return (1.0 - fit.leverage) < LEVERAGE_EPS


def loo_predictions(fit: RegressionFit) -> np.ndarray:
    """Leave-one-out predictions C' = C - h e / (1 - h), elementwise.

    Each entry equals the prediction at row n of the regression refit without
    row n.  Rows with leverage numerically equal to 1 fall back to the full-fit
    value and raise a RuntimeWarning; callers interested in the count should
    inspect loo_fallback_mask.
    """
    fallback = loo_fallback_mask(fit)
    denom = np.where(fallback, 1.0, 1.0 - fit.leverage)
    loo = fit.fitted - fit.leverage * fit.residuals / denom
    if fallback.any():
        loo = np.where(fallback, fit.fitted, loo)
        warnings.warn(
            f"{int(fallback.sum())} row(s) with leverage ~ 1 fell back to full-fit predictions",
            RuntimeWarning,
            stacklevel=2,
        )
    return loo


def loo_residuals(fit: RegressionFit) -> np.ndarray:
    """Leave-one-out errors e' = e / (1 - h); |e'| >= |e| wherever h < 1."""
    fallback = loo_fallback_mask(fit)
    denom = np.where(fallback, 1.0, 1.0 - fit.leverage)
    return np.where(fallback, fit.residuals, fit.residuals / denom)
