import math
import threading

import numpy as np
import pytest

from radialcr import likelihood as lk
from radialcr.exceptions import ConvergenceFailure, DegenerateData, OutOfBox
from radialcr.likelihood import (
    Dataset,
    LikelihoodModel,
    ProfileMode,
    fit,
    lr_statistic,
    lr_statistic_many,
    profile_loglik,
    profile_nuisance,
)
from radialcr.models import bivariate_normal_model, linear_regression_model, benchmark_data


def _no_nuisance_model(box=None):
    """Two independent unit-variance normal means; no nuisance parameters."""

    def ll(theta, nu, data):
        return float(-0.5 * ((data["x"] - theta[0]) ** 2).sum() - 0.5 * ((data["y"] - theta[1]) ** 2).sum())

    return LikelihoodModel("means", 2, 0, ll, parameter_box=box, variable_names=("x", "y"))


class TestDataset:
    def test_rejects_unequal_columns(self):
        with pytest.raises(DegenerateData):
            Dataset({"x": [1, 2, 3], "y": [1, 2]})

    def test_rejects_non_finite(self):
        with pytest.raises(DegenerateData):
            Dataset({"x": [1, np.nan, 3]})

    def test_rejects_single_row(self):
        with pytest.raises(DegenerateData):
            Dataset({"x": [1.0]})

    def test_columns_read_only(self):
        d = Dataset({"x": [1.0, 2.0]})
        with pytest.raises(ValueError):
            d["x"][0] = 5.0


class TestModelDefinition:
    def test_interest_dim_restricted(self):
        with pytest.raises(ValueError):
            LikelihoodModel("bad", 4, 0, lambda t, n, d: 0.0)

    def test_box_order_enforced(self):
        with pytest.raises(ValueError):
            LikelihoodModel("bad", 2, 0, lambda t, n, d: 0.0, parameter_box=([0, 1], [1, 0]))

    def test_default_names(self):
        m = LikelihoodModel("m", 3, 2, lambda t, n, d: 0.0)
        assert m.parameter_names == ("theta1", "theta2", "theta3")
        assert m.nuisance_names == ("nu1", "nu2")


class TestFit:
    def test_bivariate_square(self, square_data):
        f = fit(bivariate_normal_model(), square_data)
        np.testing.assert_allclose(f.theta_hat, [1.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(f.nu_hat, [1.0, 1.0, 0.0], atol=1e-15)

    def test_bivariate_square_by_simplex(self, square_data):
        f = fit(bivariate_normal_model(), square_data, use_analytic=False)
        np.testing.assert_allclose(f.theta_hat, [1.0, 1.0], atol=1e-6)
        np.testing.assert_allclose(f.nu_hat, [1.0, 1.0, 0.0], atol=1e-6)

    def test_regression_hand_ols(self, tiny_regression):
        for analytic in (True, False):
            f = fit(linear_regression_model(), tiny_regression, use_analytic=analytic)
            np.testing.assert_allclose(f.theta_hat, [-1 / 6, 3 / 2], atol=1e-8)
            np.testing.assert_allclose(f.nu_hat, [1 / 18], atol=1e-8)

    def test_analytic_bypasses_simplex(self, square_data, monkeypatch):
        def boom(*args, **kwargs):
            raise AssertionError("simplex invoked")

        monkeypatch.setattr(lk, "maximize", boom)
        f = fit(bivariate_normal_model(), square_data)
        assert f.theta_hat.tolist() == [1.0, 1.0]

    def test_no_nuisance_simplex(self, rng):
        data = Dataset({"x": rng.normal(2, 1, 20), "y": rng.normal(-1, 1, 20)})
        f = fit(_no_nuisance_model(), data)
        np.testing.assert_allclose(f.theta_hat, [data["x"].mean(), data["y"].mean()], atol=1e-8)
        assert f.nu_hat.shape == (0,)

    def test_mle_is_maximal(self, bench_fit, rng):
        model = bench_fit.model
        for _ in range(200):
            theta = bench_fit.theta_hat + rng.normal(0, 1, 2)
            nu = bench_fit.nu_hat + rng.normal(0, 0.05, 3)
            assert model.log_likelihood(theta, nu, bench_fit.data) <= bench_fit.loglik_at_mle

    def test_boundary_mle_rejected(self, square_data):
        model = bivariate_normal_model(box=([1.0, -10.0], [5.0, 10.0]))
        with pytest.raises(DegenerateData):
            fit(model, square_data)

    def test_missing_column(self):
        with pytest.raises(DegenerateData):
            fit(bivariate_normal_model(), Dataset({"x": [1.0, 2.0, 3.0]}))

    def test_zero_variance(self):
        with pytest.raises(DegenerateData):
            fit(bivariate_normal_model(), Dataset({"x": [1.0, 1.0, 1.0], "y": [0.0, 1.0, 2.0]}))

    def test_perfect_correlation(self):
        with pytest.raises(DegenerateData):
            fit(bivariate_normal_model(), Dataset({"x": [0.0, 1.0, 2.0], "y": [1.0, 3.0, 5.0]}))

    def test_unbounded_likelihood_detected(self):
        def ll(theta, nu, data):
            return theta[0] + theta[1]  # increases without bound

        model = LikelihoodModel("ramp", 2, 0, ll)
        with pytest.raises(DegenerateData):
            fit(model, Dataset({"x": [0.0, 1.0]}))

    def test_non_finite_start(self):
        model = LikelihoodModel("nan", 2, 0, lambda t, n, d: math.nan)
        with pytest.raises(DegenerateData):
            fit(model, Dataset({"x": [0.0, 1.0]}))

    def test_convergence_failure(self, rng, monkeypatch):
        monkeypatch.setattr(lk, "SIMPLEX_MAXITER", 3)
        data = Dataset({"x": rng.normal(size=10), "y": rng.normal(size=10)})
        with pytest.raises(ConvergenceFailure):
            fit(bivariate_normal_model(), data, use_analytic=False)


class TestProfile:
    def test_profile_at_mle(self, bench_fit):
        assert profile_loglik(bench_fit, bench_fit.theta_hat) == bench_fit.loglik_at_mle

    def test_no_nuisance_reduces_to_loglik(self, rng):
        data = Dataset({"x": rng.normal(size=8), "y": rng.normal(size=8)})
        f = fit(_no_nuisance_model(), data, "full")
        theta = np.array([0.3, -0.2])
        assert profile_loglik(f, theta) == f.model.log_likelihood(theta, np.zeros(0), data)

    def test_full_profile_dominates_plug_in(self, regression_fit, rng):
        full = regression_fit.with_mode(ProfileMode.FULL_PROFILE)
        for _ in range(25):
            theta = regression_fit.theta_hat + rng.normal(0, 1, 2)
            assert profile_loglik(full, theta) >= profile_loglik(regression_fit, theta)

    def test_profiled_variance_is_rss_over_n(self, regression_fit, rng):
        full = regression_fit.with_mode("full")
        x, y = regression_fit.data["x"], regression_fit.data["y"]
        for _ in range(20):
            beta = regression_fit.theta_hat + rng.normal(0, 3, 2)
            nu, _, _ = profile_nuisance(full, beta)
            rss = float(((y - beta[0] - beta[1] * x) ** 2).sum())
            assert nu[0] == pytest.approx(rss / 3, abs=1e-8)

    def test_out_of_box(self, square_data):
        f = fit(bivariate_normal_model(box=([-5, -5], [5, 5])), square_data)
        with pytest.raises(OutOfBox):
            profile_loglik(f, [6.0, 0.0])
        with pytest.raises(OutOfBox):
            lr_statistic(f, [0.0, -5.5])


class TestStatistic:
    def test_zero_at_mle(self, bench_fit):
        assert lr_statistic(bench_fit, bench_fit.theta_hat) == 0.0

    def test_square_data_value(self, square_data):
        # n/(1-rho^2) * ((1-2)/1)^2 with n=4, rho=0
        f = fit(bivariate_normal_model(), square_data)
        assert lr_statistic(f, [2.0, 1.0]) == pytest.approx(4.0, abs=1e-12)

    @pytest.mark.parametrize("mode", ["plugin", "full"])
    def test_nonnegative(self, mode, rng):
        data = benchmark_data(seed=7)
        f = fit(bivariate_normal_model(), data, mode)
        n_draws = 1000 if mode == "plugin" else 100
        for _ in range(n_draws):
            theta = f.theta_hat + rng.uniform(-5, 5, 2)
            assert lr_statistic(f, theta) >= -1e-9

    def test_counter_plug_in(self, bench_fit, rng):
        before = bench_fit.n_evaluations
        for k in range(1, 11):
            lr_statistic(bench_fit, bench_fit.theta_hat + rng.normal(size=2))
            assert bench_fit.n_evaluations == before + k
        lr_statistic(bench_fit, bench_fit.theta_hat)
        assert bench_fit.n_evaluations == before + 11

    def test_counter_full_profile_counts_inner_evaluations(self, regression_fit):
        full = regression_fit.with_mode("full")
        lr_statistic(full, regression_fit.theta_hat + 1.0)
        assert full.n_evaluations > 1

    def test_concurrent_counter(self, bench_fit):
        before = bench_fit.n_evaluations

        def work():
            for k in range(500):
                lr_statistic(bench_fit, bench_fit.theta_hat + 0.001 * k)

        threads = [threading.Thread(target=work) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert bench_fit.n_evaluations == before + 8 * 500

    def test_batch_matches_scalar(self, bench_fit, rng):
        thetas = bench_fit.theta_hat + rng.normal(0, 2, (50, 2))
        thetas[7] = bench_fit.theta_hat
        before = bench_fit.n_evaluations
        batch = lr_statistic_many(bench_fit, thetas)
        assert bench_fit.n_evaluations == before + 50
        scalar = [lr_statistic(bench_fit, t) for t in thetas]
        np.testing.assert_allclose(batch, scalar, rtol=1e-12, atol=1e-10)
        assert batch[7] == 0.0
