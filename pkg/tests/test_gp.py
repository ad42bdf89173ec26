"""GP baseline tests: kernel values, Cholesky-vs-dense-inverse likelihood,
hand-checked kriging, hyperparameter recovery, and prior sampling."""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from quantemu.exceptions import CapacityError, ConditioningError
from quantemu.gp import (
    GpConfig,
    GpModel,
    fit_gp,
    gp_prior_sample,
    log_marginal_likelihood,
    matern52_kernel,
    se_kernel,
)
from quantemu.rng import SeededRng


def dense_lml(x, y, ls, s2, g, mean):
    """Reference log likelihood via explicit inverse and determinant."""
    k = matern52_kernel(x, x, ls, s2) + g * np.eye(len(y))
    resid = y - mean
    sign, logdet = np.linalg.slogdet(k)
    assert sign > 0
    return float(-0.5 * resid @ np.linalg.inv(k) @ resid - 0.5 * logdet
                 - 0.5 * len(y) * math.log(2 * math.pi))


class TestKernels:
    def test_matern_diagonal_is_variance(self):
        x = np.array([[0.3, 0.7], [1.0, -2.0]])
        k = matern52_kernel(x, x, [0.5, 2.0], variance=3.5)
        assert_allclose(np.diag(k), 3.5, rtol=1e-14)

    def test_matern_unit_distance_value(self):
        # (1 + sqrt5 + 5/3) exp(-sqrt5) at r = 1, variance 1
        k = matern52_kernel([[0.0]], [[1.0]], [1.0], 1.0)
        assert_allclose(k[0, 0], 0.5239941088318203, rtol=1e-12)
        assert_allclose(k[0, 0], 0.5240, atol=5e-5)

    def test_matern_far_field_decays(self):
        k = matern52_kernel([[0.0]], [[60.0]], [1.0], 1.0)
        assert k[0, 0] < 1e-20

    def test_matern_symmetric(self):
        rng = SeededRng(3)
        x = rng.uniform(size=(7, 3))
        k = matern52_kernel(x, x, [0.4, 0.9, 1.7], 2.0)
        assert_allclose(k, k.T, atol=1e-15)

    def test_matern_anisotropy_scales_per_dimension(self):
        # doubling both the offset and its lengthscale leaves k unchanged
        a = matern52_kernel([[0.0, 0.0]], [[1.0, 0.0]], [0.5, 1.0], 1.0)
        b = matern52_kernel([[0.0, 0.0]], [[2.0, 0.0]], [1.0, 1.0], 1.0)
        assert_allclose(a, b, rtol=1e-14)

    def test_matern_rejects_bad_hyperparams(self):
        with pytest.raises(ValueError, match="positive"):
            matern52_kernel([[0.0]], [[1.0]], [-1.0], 1.0)
        with pytest.raises(ValueError, match="positive"):
            matern52_kernel([[0.0]], [[1.0]], [1.0], 0.0)

    def test_se_printed_form_value(self):
        # variance 9, lengthscale 0.2, squared distance 0.2 -> 9 e^{-1}
        x1 = np.array([[0.0]])
        x2 = np.array([[math.sqrt(0.2)]])
        k = se_kernel(x1, x2, lengthscale=0.2, variance=9.0)
        assert_allclose(k[0, 0], 9.0 * math.exp(-1.0), rtol=1e-12)
        assert_allclose(k[0, 0], 3.3109, atol=5e-5)

    def test_se_diagonal_and_symmetry(self):
        rng = SeededRng(5)
        x = rng.uniform(size=(6, 2))
        k = se_kernel(x, x, 0.3, 4.0)
        assert_allclose(np.diag(k), 4.0, rtol=1e-14)
        assert_allclose(k, k.T, atol=1e-15)


class TestLogMarginalLikelihood:
    def test_cholesky_matches_dense_inverse(self):
        # small-n identity between the factored and brute-force formulas
        for seed in range(6):
            rng = SeededRng(seed)
            n = int(rng.integers(5, 21))
            d = int(rng.integers(1, 4))
            x = rng.uniform(size=(n, d))
            y = rng.normal(size=n)
            ls = rng.uniform(0.2, 2.0, size=d)
            s2 = float(rng.uniform(0.5, 3.0))
            g = float(rng.uniform(0.01, 0.5))
            got = log_marginal_likelihood(x, y, ls, s2, g, mean=0.1)
            want = dense_lml(x, y, ls, s2, g, 0.1)
            assert_allclose(got, want, rtol=0, atol=1e-8)

    def test_default_mean_is_sample_mean(self):
        rng = SeededRng(11)
        x = rng.uniform(size=(8, 1))
        y = rng.normal(size=8) + 4.0
        a = log_marginal_likelihood(x, y, [0.5], 1.0, 0.1)
        b = log_marginal_likelihood(x, y, [0.5], 1.0, 0.1, mean=float(np.mean(y)))
        assert_allclose(a, b, rtol=1e-14)

    def test_duplicate_points_zero_nugget_fail_cleanly(self):
        x = np.array([[0.5], [0.5], [1.0]])
        y = np.array([1.0, 1.0, 2.0])
        with pytest.raises(ConditioningError, match="positive definite"):
            log_marginal_likelihood(x, y, [0.3], 1.0, 0.0)

    def test_negative_nugget_rejected(self):
        with pytest.raises(ValueError, match="nugget"):
            log_marginal_likelihood(np.eye(2), np.ones(2), [1.0, 1.0], 1.0, -0.1)


class TestPrediction:
    def make_model(self, x, y, ls, s2, g, mean=0.0):
        return GpModel(np.asarray(x, float), np.asarray(y, float),
                       ls, s2, g, mean, 0.0, GpConfig())

    def test_two_point_hand_instance(self):
        # against the direct 2x2 inverse, worked in-test
        x = np.array([[0.0], [1.0]])
        y = np.array([1.0, -1.0])
        ls, s2, g, mu = np.array([0.5]), 2.0, 0.1, 0.25
        model = self.make_model(x, y, ls, s2, g, mu)
        xs = np.array([[0.3]])
        k = matern52_kernel(x, x, ls, s2) + g * np.eye(2)
        ks = matern52_kernel(x, xs, ls, s2)
        ki = np.linalg.inv(k)
        want_mean = mu + ks.T @ ki @ (y - mu)
        want_var = s2 + g - ks.T @ ki @ ks
        mean, var = model.predict(xs)
        assert_allclose(mean, want_mean.ravel(), rtol=0, atol=1e-10)
        assert_allclose(var, want_var.ravel(), rtol=0, atol=1e-10)

    def test_dense_inverse_agreement_batch(self):
        for seed in range(4):
            rng = SeededRng(100 + seed)
            n = int(rng.integers(4, 21))
            x = rng.uniform(size=(n, 2))
            y = rng.normal(size=n)
            ls = rng.uniform(0.3, 1.5, size=2)
            s2, g = 1.7, 0.05
            model = self.make_model(x, y, ls, s2, g, mean=0.3)
            xs = rng.uniform(size=(9, 2))
            k = matern52_kernel(x, x, ls, s2) + g * np.eye(n)
            ks = matern52_kernel(x, xs, ls, s2)
            ki = np.linalg.inv(k)
            want_mean = 0.3 + ks.T @ ki @ (y - 0.3)
            want_var = s2 + g - np.einsum("ij,jk,ki->i", ks.T, ki, ks)
            mean, var = model.predict(xs)
            assert_allclose(mean, want_mean, rtol=0, atol=1e-8)
            assert_allclose(var, want_var, rtol=0, atol=1e-8)

    def test_interpolates_at_tiny_nugget(self):
        rng = SeededRng(7)
        x = rng.uniform(size=(12, 1))
        y = np.sin(3 * x[:, 0])
        model = self.make_model(x, y, [0.4], 1.0, 1e-10)
        mean, var = model.predict(x)
        assert_allclose(mean, y, atol=1e-5)
        assert np.all(var < 1e-6)

    def test_far_field_reverts_to_prior(self):
        x = np.linspace(0, 1, 10)[:, None]
        y = np.sin(3 * x[:, 0])
        model = self.make_model(x, y, [0.3], 1.5, 0.2, mean=0.7)
        mean, var = model.predict([[500.0]])
        assert_allclose(mean[0], 0.7, atol=1e-9)
        assert_allclose(var[0], 1.5 + 0.2, rtol=1e-9)

    def test_variance_nonnegative(self):
        rng = SeededRng(8)
        x = rng.uniform(size=(30, 2))
        y = rng.normal(size=30)
        model = self.make_model(x, y, [0.5, 0.5], 1.0, 1e-6)
        _, var = model.predict(rng.uniform(size=(200, 2)))
        assert np.all(var >= 0)

    def test_mean_linear_in_y(self):
        rng = SeededRng(9)
        x = rng.uniform(size=(15, 1))
        y1 = rng.normal(size=15)
        y2 = rng.normal(size=15)
        xs = rng.uniform(size=(6, 1))
        args = ([0.4], 1.2, 0.05, 0.0)
        m1 = self.make_model(x, y1, *args).point(xs)
        m2 = self.make_model(x, y2, *args).point(xs)
        m12 = self.make_model(x, y1 + y2, *args).point(xs)
        assert_allclose(m12, m1 + m2, atol=1e-10)

    def test_quantiles_gaussian_structure(self):
        x = np.linspace(0, 1, 20)[:, None]
        y = np.cos(4 * x[:, 0])
        model = self.make_model(x, y, [0.3], 1.0, 0.1)
        xs = np.array([[0.25], [0.8]])
        q = model.predict_quantiles(xs, [0.05, 0.5, 0.95])
        mean, var = model.predict(xs)
        assert_allclose(q[:, 1], mean, atol=1e-12)
        width = q[:, 2] - q[:, 0]
        assert_allclose(width, 2 * 1.6448536269514722 * np.sqrt(var), rtol=1e-9)
        assert np.all(np.diff(q, axis=1) > 0)
        assert_allclose(model.point(xs), mean, atol=1e-14)

    def test_quantile_level_validation(self):
        model = self.make_model(np.eye(3), np.ones(3), [1, 1, 1], 1.0, 0.1)
        with pytest.raises(ValueError, match="inside"):
            model.predict_quantiles(np.eye(3), [0.0, 0.5])
        with pytest.raises(ValueError, match="sorted"):
            model.predict_quantiles(np.eye(3), [0.9, 0.1])
        with pytest.raises(ValueError, match="non-empty"):
            model.predict_quantiles(np.eye(3), [])


class TestFit:
    def test_recovers_lengthscale_1d(self):
        # generative oracle: data drawn from a known GP; the fitted log
        # lengthscale should land within +-0.5 averaged over seeds
        true_ls = 0.2
        errs = []
        for seed in range(10):
            rng = SeededRng(200 + seed)
            x = np.sort(rng.uniform(size=200))[:, None]
            f = gp_prior_sample(x, rng, lengthscales=[true_ls], variance=2.0)
            y = f + rng.normal(0, 0.1, size=200)
            model = fit_gp(x, y, GpConfig(restarts=3), seed=seed)
            errs.append(math.log(model.lengthscales[0]) - math.log(true_ls))
        assert abs(float(np.mean(errs))) < 0.5

    def test_pure_noise_attributes_variance_to_nugget(self):
        rng = SeededRng(42)
        x = rng.uniform(size=(150, 1))
        y = rng.normal(size=150)
        model = fit_gp(x, y, GpConfig(restarts=3), seed=0)
        assert model.signal_variance / model.nugget < 0.2

    def test_noiseless_data_hits_nugget_floor(self):
        rng = SeededRng(21)
        x = np.sort(rng.uniform(size=60))[:, None]
        y = np.sin(4 * x[:, 0])
        model = fit_gp(x, y, GpConfig(restarts=2), seed=0)
        assert model.nugget >= 1e-6 * np.var(y) * (1 - 1e-9)

    def test_prediction_quality_on_smooth_1d(self):
        rng = SeededRng(31)
        x = rng.uniform(size=(120, 1))
        y = np.sin(5 * x[:, 0]) + rng.normal(0, 0.05, size=120)
        model = fit_gp(x, y, GpConfig(restarts=3), seed=1)
        xs = np.linspace(0.05, 0.95, 80)[:, None]
        rmse = np.sqrt(np.mean((model.point(xs) - np.sin(5 * xs[:, 0])) ** 2))
        assert rmse < 0.08

    def test_anisotropic_refinement_finds_inert_dimension(self):
        rng = SeededRng(55)
        x = rng.uniform(size=(250, 2))
        y = np.sin(6 * x[:, 0]) + rng.normal(0, 0.05, size=250)
        model = fit_gp(x, y, GpConfig(restarts=2, max_iterations=400), seed=2)
        # second input is inert: its fitted lengthscale should be much longer
        assert model.lengthscales[1] > 3 * model.lengthscales[0]

    def test_isotropic_mode_ties_lengthscales(self):
        rng = SeededRng(56)
        x = rng.uniform(size=(80, 3))
        y = rng.normal(size=80)
        model = fit_gp(x, y, GpConfig(restarts=2, anisotropic=False), seed=0)
        assert model.lengthscales.shape == (3,)
        assert np.ptp(model.lengthscales) == 0.0

    def test_deterministic_given_seed(self):
        rng = SeededRng(60)
        x = rng.uniform(size=(50, 2))
        y = rng.normal(size=50)
        m1 = fit_gp(x, y, GpConfig(restarts=2), seed=9)
        m2 = fit_gp(x, y, GpConfig(restarts=2), seed=9)
        assert_allclose(m1.lengthscales, m2.lengthscales, rtol=0, atol=0)
        assert m1.nugget == m2.nugget and m1.lml == m2.lml

    def test_capacity_cap(self):
        x = np.zeros((11, 1))
        y = np.zeros(11)
        with pytest.raises(CapacityError, match="cap of 10"):
            fit_gp(x, y, GpConfig(train_size_cap=10))

    def test_input_validation(self):
        with pytest.raises(ValueError, match="row counts"):
            fit_gp(np.zeros((5, 1)), np.zeros(4))
        bad = np.ones(5)
        bad[2] = np.nan
        with pytest.raises(ValueError, match="finite"):
            fit_gp(np.zeros((5, 1)) + np.arange(5)[:, None], bad)


class TestPriorSampler:
    def test_deterministic_given_seed(self):
        x = np.linspace(0, 1, 9)[:, None]
        a = gp_prior_sample(x, SeededRng(4), lengthscales=[0.3], variance=2.0)
        b = gp_prior_sample(x, SeededRng(4), lengthscales=[0.3], variance=2.0)
        assert_allclose(a, b, atol=0)

    def test_single_point_marginal(self):
        draws = gp_prior_sample(np.array([[0.3]]), SeededRng(17),
                                lengthscales=[1.0], variance=2.0, mean=5.0,
                                n_draws=10_000)
        se = math.sqrt(2.0 / 10_000)
        assert abs(float(np.mean(draws)) - 5.0) < 3 * se
        assert abs(float(np.var(draws)) - 2.0) < 0.2

    def test_coincident_points_nearly_equal(self):
        x = np.array([[0.0], [1e-9]])
        draws = gp_prior_sample(x, SeededRng(2), lengthscales=[0.5],
                                variance=4.0, n_draws=50)
        gaps = np.abs(draws[:, 0] - draws[:, 1])
        assert np.max(gaps) < 1e-3 * 2.0

    def test_empirical_covariance_smoke(self):
        x = np.array([[0.0], [0.4], [1.1]])
        draws = gp_prior_sample(x, SeededRng(23), lengthscales=[0.6],
                                variance=1.5, n_draws=4000)
        emp = np.cov(draws.T)
        want = matern52_kernel(x, x, [0.6], 1.5)
        assert np.max(np.abs(emp - want)) < 0.15 * 1.5

    def test_se_kernel_path(self):
        x = np.linspace(0, 1, 5)[:, None]
        draws = gp_prior_sample(x, SeededRng(6), lengthscales=0.2,
                                variance=9.0, mean=13.0, kernel="se",
                                n_draws=3)
        assert draws.shape == (3, 5)

    def test_unknown_kernel_rejected(self):
        with pytest.raises(ValueError, match="unknown kernel"):
            gp_prior_sample(np.eye(2), SeededRng(0), lengthscales=[1, 1],
                            kernel="cubic")

    def test_missing_lengthscale_rejected(self):
        with pytest.raises(ValueError, match="lengthscale"):
            gp_prior_sample(np.eye(2), SeededRng(0))
