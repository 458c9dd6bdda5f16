"""Path simulation: correlation factors, exactness, determinism, pooling, I/O."""

import numpy as np
import pytest

from lsmc.market import (
    ExerciseSchedule,
    GbmModel,
    correlation_factor,
    dump_paths,
    generate_paths,
    load_paths,
    split_pool,
    uniform_schedule,
)

PUT_MODEL = GbmModel(
    spot=[100.0], rate=0.05, dividend=[0.02], vol=[0.20], correlation=[[1.0]]
)
BESTOF_MODEL = GbmModel(
    spot=[100.0, 100.0],
    rate=0.05,
    dividend=[0.10, 0.10],
    vol=[0.20, 0.20],
    correlation=np.eye(2),
)
BASKET_MODEL = GbmModel(
    spot=[100.0] * 4,
    rate=0.0,
    dividend=[0.0] * 4,
    vol=[0.40] * 4,
    correlation=np.full((4, 4), 0.5) + 0.5 * np.eye(4),
)
PUT_SCHEDULE = uniform_schedule(5, 1.0)


class TestValidation:
    def test_schedule_rejects_time_zero(self):
        with pytest.raises(ValueError, match="strictly positive"):
            ExerciseSchedule(np.array([0.0, 0.5, 1.0]))
        with pytest.raises(ValueError, match="strictly increasing"):
            ExerciseSchedule(np.array([0.5, 0.5, 1.0]))

    def test_model_rejects_bad_parameters(self):
        with pytest.raises(ValueError, match="positive"):
            GbmModel(spot=[-1.0], rate=0.0, dividend=[0.0], vol=[0.2], correlation=[[1.0]])
        with pytest.raises(ValueError, match="unit diagonal"):
            GbmModel(spot=[1.0, 1.0], rate=0.0, dividend=[0.0, 0.0], vol=[0.2, 0.2],
                     correlation=[[0.9, 0.0], [0.0, 1.0]])

    def test_antithetic_needs_even_path_count(self):
        with pytest.raises(ValueError, match="even"):
            generate_paths(PUT_MODEL, PUT_SCHEDULE, 101, seed=1, antithetic=True)


class TestCorrelationFactor:
    def test_identity(self):
        assert correlation_factor(np.eye(2)) == pytest.approx(np.eye(2))

    def test_two_asset_half_correlation_closed_form(self):
        chol = correlation_factor(np.array([[1.0, 0.5], [0.5, 1.0]]))
        assert chol == pytest.approx(np.array([[1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0]]))

    def test_basket_case_reconstructs(self):
        rho = np.full((4, 4), 0.5) + 0.5 * np.eye(4)
        chol = correlation_factor(rho)
        assert np.abs(chol @ chol.T - rho).max() < 1e-12
        assert np.allclose(chol, np.tril(chol))

    def test_indefinite_rejected(self):
        with pytest.raises(ValueError, match="positive semidefinite"):
            correlation_factor(np.array([[1.0, 1.2], [1.2, 1.0]]))

    def test_singular_but_psd_gets_floored_factor(self):
        rho = np.ones((2, 2))  # perfectly correlated, exactly singular
        chol = correlation_factor(rho)
        assert np.abs(chol @ chol.T - rho).max() < 1e-5


class TestGeneratePaths:
    def test_zero_vol_is_pure_drift(self):
        model = GbmModel(spot=[100.0], rate=0.05, dividend=[0.02], vol=[0.0],
                         correlation=[[1.0]])
        paths = generate_paths(model, PUT_SCHEDULE, 8, seed=0)
        expected = 100.0 * np.exp(0.03 * PUT_SCHEDULE.times)
        for n in range(8):
            assert paths.values[n, :, 0] == pytest.approx(expected, rel=1e-14)

    def test_antithetic_pairs_mirror_log_moves(self):
        paths = generate_paths(PUT_MODEL, PUT_SCHEDULE, 64, seed=3)
        forward = 100.0 * np.exp(0.03 * PUT_SCHEDULE.times)
        log_even = np.log(paths.values[0::2, :, 0] / forward)
        log_odd = np.log(paths.values[1::2, :, 0] / forward)
        # mirrored Gaussians shift the deterministic -vol^2/2 * t term equally
        drift = -0.5 * 0.2**2 * PUT_SCHEDULE.times
        assert log_even + log_odd == pytest.approx(np.tile(2 * drift, (32, 1)), abs=1e-12)

    def test_positive_and_deterministic(self):
        a = generate_paths(BASKET_MODEL, uniform_schedule(10, 5.0), 512, seed=9)
        b = generate_paths(BASKET_MODEL, uniform_schedule(10, 5.0), 512, seed=9)
        assert (a.values > 0.0).all()
        np.testing.assert_array_equal(a.values, b.values)
        c = generate_paths(BASKET_MODEL, uniform_schedule(10, 5.0), 512, seed=10)
        assert not np.array_equal(a.values, c.values)

    def test_terminal_mean_matches_lognormal_moment(self):
        # put-case forward at T=1 is 100 * exp(0.03)
        paths = generate_paths(PUT_MODEL, PUT_SCHEDULE, 100_000, seed=2024)
        terminal = paths.values[:, -1, 0]
        pair_means = terminal.reshape(-1, 2).mean(axis=1)
        se = pair_means.std(ddof=1) / np.sqrt(pair_means.size)
        assert abs(terminal.mean() - 100.0 * np.exp(0.03)) < 3.0 * se

    @pytest.mark.parametrize(
        "model,schedule",
        [
            (PUT_MODEL, PUT_SCHEDULE),
            (BESTOF_MODEL, uniform_schedule(9, 3.0)),
            (BASKET_MODEL, uniform_schedule(10, 5.0)),
        ],
        ids=["put", "bestof", "basket"],
    )
    def test_martingale_at_one_million_paths(self, model, schedule):
        paths = generate_paths(model, schedule, 1_000_000, seed=77)
        t_final = schedule.maturity
        for j in range(model.n_assets):
            deflated = np.exp(-(model.rate - model.dividend[j]) * t_final) * paths.values[:, -1, j]
            pair_means = deflated.reshape(-1, 2).mean(axis=1)
            se = pair_means.std(ddof=1) / np.sqrt(pair_means.size)
            assert abs(deflated.mean() - model.spot[j]) < 4.0 * se

    def test_antithetic_reduces_european_put_variance(self):
        n = 100_000
        anti = generate_paths(PUT_MODEL, PUT_SCHEDULE, n, seed=55, antithetic=True)
        plain = generate_paths(PUT_MODEL, PUT_SCHEDULE, n, seed=55, antithetic=False)
        payoff_anti = np.exp(-0.05) * np.maximum(100.0 - anti.values[:, -1, 0], 0.0)
        payoff_plain = np.exp(-0.05) * np.maximum(100.0 - plain.values[:, -1, 0], 0.0)
        var_anti = payoff_anti.reshape(-1, 2).mean(axis=1).var(ddof=1) / (n // 2)
        var_plain = payoff_plain.var(ddof=1) / n
        assert var_anti <= var_plain


class TestSplitPool:
    def test_single_split_is_the_pool(self):
        pool = generate_paths(PUT_MODEL, PUT_SCHEDULE, 128, seed=1)
        (only,) = split_pool(pool, 1)
        np.testing.assert_array_equal(only.values, pool.values)
        assert only.pool_offset == 0

    def test_offsets_and_disjoint_cover(self):
        pool = generate_paths(PUT_MODEL, PUT_SCHEDULE, 1200, seed=1)
        sets = split_pool(pool, 10)
        assert [s.n_paths for s in sets] == [120] * 10
        assert [s.pool_offset for s in sets] == list(range(0, 1200, 120))
        np.testing.assert_array_equal(np.concatenate([s.values for s in sets]), pool.values)

    def test_full_scale_split_arithmetic(self):
        for n_mc in (10, 20, 30, 40, 60, 120, 240, 720):
            assert 1_440_000 % n_mc == 0

    def test_rejects_nondividing_and_pair_breaking(self):
        pool = generate_paths(PUT_MODEL, PUT_SCHEDULE, 100, seed=1)
        with pytest.raises(ValueError, match="does not divide"):
            split_pool(pool, 7)
        with pytest.raises(ValueError, match="antithetic pairs"):
            split_pool(pool, 20)  # blocks of 5 would split pairs

    def test_provenance_distinguishes_blocks(self):
        pool = generate_paths(PUT_MODEL, PUT_SCHEDULE, 64, seed=1)
        a, b = split_pool(pool, 2)
        assert a.provenance != b.provenance


def test_dump_load_round_trip(tmp_path):
    paths = generate_paths(BESTOF_MODEL, uniform_schedule(9, 3.0), 32, seed=123)
    target = tmp_path / "pool.bin"
    dump_paths(paths, str(target))
    loaded = load_paths(str(target), paths.times, paths.rate)
    np.testing.assert_array_equal(loaded.values, paths.values)
    assert loaded.seed == paths.seed
    assert loaded.antithetic == paths.antithetic
    assert loaded.provenance == paths.provenance

    with pytest.raises(ValueError, match="dates"):
        load_paths(str(target), paths.times[:-1], paths.rate)
