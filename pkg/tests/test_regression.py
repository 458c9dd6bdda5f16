"""Core least-squares and leave-one-out tests.

The three-point system with states (-4, 0, 2) and responses (-4, 4, 1) is the
worked reference: the full fit is y = 1 + x, the middle point's self-excluded
prediction is -2/3, and its leverage values are (13/14, 5/14, 5/7).
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsmc.regression import (
    DesignMatrix,
    fit_least_squares,
    loo_fallback_mask,
    loo_predictions,
    loo_residuals,
)

THREE_POINT_X = np.array([[1.0, -4.0], [1.0, 0.0], [1.0, 2.0]])
THREE_POINT_Y = np.array([-4.0, 4.0, 1.0])


def random_system(rng, n=None, m=None):
    m = m if m is not None else int(rng.integers(1, 7))
    n = n if n is not None else int(rng.integers(m + 2, 201))
    x = np.column_stack([np.ones(n), rng.standard_normal((n, m - 1))]) if m > 1 else np.ones((n, 1))
    y = rng.standard_normal(n) * rng.uniform(0.5, 3.0)
    return x, y


def brute_force_loo(x, y):
    """Refit with each row deleted and predict at that row; the frozen oracle."""
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        beta, *_ = np.linalg.lstsq(x[keep], y[keep], rcond=None)
        out[i] = x[i] @ beta
    return out


class TestFitLeastSquares:
    def test_intercept_only(self):
        y = np.array([3.0, -1.0, 4.0, 0.0])
        fit = fit_least_squares(np.ones((4, 1)), y)
        assert fit.beta == pytest.approx([y.mean()])
        assert fit.leverage == pytest.approx(np.full(4, 0.25))
        assert fit.rank == 1

    def test_three_point_line(self):
        fit = fit_least_squares(THREE_POINT_X, THREE_POINT_Y)
        assert fit.beta == pytest.approx([1.0, 1.0], abs=1e-12)
        assert fit.fitted == pytest.approx([-3.0, 1.0, 3.0], abs=1e-12)
        assert fit.leverage == pytest.approx([13 / 14, 5 / 14, 5 / 7], abs=1e-12)
        assert fit.rank == 2

    def test_interpolating_square_system(self):
        rng = np.random.default_rng(7)
        x = np.column_stack([np.ones(3), rng.standard_normal((3, 2))])
        y = rng.standard_normal(3)
        fit = fit_least_squares(x, y)
        assert fit.fitted == pytest.approx(y, abs=1e-10)
        assert fit.residuals == pytest.approx(np.zeros(3), abs=1e-10)
        assert fit.leverage == pytest.approx(np.ones(3), abs=1e-10)

    def test_rank_deficiency_detected_and_projection_unchanged(self):
        rng = np.random.default_rng(11)
        x, y = random_system(rng, n=60, m=4)
        x_dup = np.column_stack([x, x[:, 1] - 2.0 * x[:, 2]])
        fit, fit_dup = fit_least_squares(x, y), fit_least_squares(x_dup, y)
        assert fit_dup.rank == 4
        assert fit_dup.fitted == pytest.approx(fit.fitted, abs=1e-9)
        assert fit_dup.leverage == pytest.approx(fit.leverage, abs=1e-9)

    def test_wildly_scaled_columns_avoid_rank_collapse(self):
        # raw price monomials span ~20 orders of magnitude at degree 10; the
        # rank rule applied without equilibration would keep ~5 directions
        rng = np.random.default_rng(3)
        s = rng.uniform(80.0, 120.0, size=500)
        x = np.column_stack([s**k for k in range(11)])
        sv = np.linalg.svd(x, compute_uv=False)
        raw_rank = int((sv > max(x.shape) * np.finfo(float).eps * sv[0]).sum())
        fit = fit_least_squares(x, rng.standard_normal(500))
        assert raw_rank <= 5
        assert fit.rank >= 10
        assert abs(fit.leverage.sum() - fit.rank) < 1e-8

    def test_rejects_nonfinite_with_location(self):
        x = THREE_POINT_X.copy()
        x[1, 1] = np.nan
        with pytest.raises(ValueError, match="row 1, column 1"):
            fit_least_squares(x, THREE_POINT_Y)
        with pytest.raises(ValueError, match="response at row 2"):
            fit_least_squares(THREE_POINT_X, np.array([0.0, 1.0, np.inf]))

    def test_design_matrix_wrapper_validation(self):
        with pytest.raises(ValueError, match="first design column"):
            DesignMatrix(np.array([[2.0, 1.0], [1.0, 0.0]]))
        dm = DesignMatrix(THREE_POINT_X)
        fit = fit_least_squares(dm, THREE_POINT_Y)
        assert fit.beta == pytest.approx([1.0, 1.0], abs=1e-12)


class TestLeaveOneOut:
    def test_three_point_loo_prediction(self):
        fit = fit_least_squares(THREE_POINT_X, THREE_POINT_Y)
        loo = loo_predictions(fit)
        assert loo[1] == pytest.approx(-2.0 / 3.0, abs=1e-12)
        assert loo == pytest.approx([10.0, -2.0 / 3.0, 8.0], abs=1e-12)

    def test_three_point_loo_residual(self):
        fit = fit_least_squares(THREE_POINT_X, THREE_POINT_Y)
        assert loo_residuals(fit)[1] == pytest.approx(14.0 / 3.0, abs=1e-12)

    def test_zero_residuals_mean_no_correction(self):
        x = THREE_POINT_X
        y = 2.0 + 0.5 * x[:, 1]
        fit = fit_least_squares(x, y)
        assert loo_predictions(fit) == pytest.approx(fit.fitted, abs=1e-12)

    def test_zero_leverage_row_keeps_residual(self):
        fit = fit_least_squares(THREE_POINT_X, THREE_POINT_Y)
        hacked = type(fit)(
            beta=fit.beta,
            fitted=fit.fitted,
            residuals=fit.residuals,
            leverage=np.array([0.0, 0.5, 0.5]),
            rank=fit.rank,
        )
        assert loo_residuals(hacked)[0] == fit.residuals[0]

    def test_matches_brute_force_refits(self):
        rng = np.random.default_rng(42)
        x, y = random_system(rng, n=50, m=3)
        fit = fit_least_squares(x, y)
        assert np.allclose(loo_predictions(fit), brute_force_loo(x, y), rtol=1e-9, atol=1e-9)

    def test_leverage_one_falls_back_with_warning(self):
        # an interpolating fit has h = 1 everywhere
        rng = np.random.default_rng(5)
        x = np.column_stack([np.ones(2), rng.standard_normal(2)])
        y = rng.standard_normal(2)
        fit = fit_least_squares(x, y)
        assert loo_fallback_mask(fit).all()
        with pytest.warns(RuntimeWarning, match="leverage"):
            loo = loo_predictions(fit)
        assert loo == pytest.approx(fit.fitted)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_leverage_and_identities(seed):
    rng = np.random.default_rng(seed)
    x, y = random_system(rng)
    fit = fit_least_squares(x, y)

    assert (fit.leverage >= 0.0).all() and (fit.leverage <= 1.0).all()
    assert abs(fit.leverage.sum() - fit.rank) < 1e-8
    np.testing.assert_allclose(fit.fitted + fit.residuals, y, rtol=1e-13, atol=1e-13)

    loo = loo_predictions(fit)
    # fitted value is the leverage-weighted average of LOO prediction and observation
    assert np.allclose(
        fit.fitted, (1.0 - fit.leverage) * loo + fit.leverage * y, rtol=1e-10, atol=1e-10
    )
    # LOO error equals response minus LOO prediction
    assert np.allclose(loo_residuals(fit), y - loo, rtol=1e-12, atol=1e-12)
    # self-exclusion can only grow the error
    assert (np.abs(loo_residuals(fit)) >= np.abs(fit.residuals) - 1e-12).all()


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.1, 100.0))
def test_scaling_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    x, y = random_system(rng)
    fit, fit_scaled = fit_least_squares(x, y), fit_least_squares(x, scale * y)
    assert np.allclose(fit_scaled.fitted, scale * fit.fitted, rtol=1e-9, atol=1e-12)
    assert np.allclose(fit_scaled.leverage, fit.leverage, rtol=0, atol=1e-12)
    assert np.allclose(
        loo_predictions(fit_scaled), scale * loo_predictions(fit), rtol=1e-9, atol=1e-12
    )


def test_leverage_is_fitted_value_derivative():
    rng = np.random.default_rng(17)
    x, y = random_system(rng, n=80, m=4)
    fit = fit_least_squares(x, y)
    delta = 1e-6
    for n in (0, 17, 79):
        bumped = y.copy()
        bumped[n] += delta
        slope = (fit_least_squares(x, bumped).fitted[n] - fit.fitted[n]) / delta
        assert slope == pytest.approx(fit.leverage[n], abs=1e-5)
