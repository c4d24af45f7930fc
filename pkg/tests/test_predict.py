"""Tests for kriging, leave-one-out and the empirical semi-variogram."""
import numpy as np
import pytest

import predict
from core import SiteSet, ParamVector
from models import CorrelationFamily, correlate
from data.sites import generate_perturbed_grid
from predict import (
    krige, simple_kriging, loo_rmse, empirical_semivariogram, semivariogram_overlay, VariogramEstimate,
)
from study.engine import simulate_field


class TestKriging:
    def test_interpolates_without_nugget(self, rng):
        """50 random instances; prediction at a data site returns its datum."""
        for _ in range(50):
            n = int(rng.integers(2, 11))
            sites = SiteSet(rng.uniform(size=(n, 2)), rng.normal(size=n))
            theta = ParamVector(0.0, float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.05, 0.3)))
            k = int(rng.integers(n))
            assert simple_kriging(sites, "exponential", theta, sites.coords[k]) == pytest.approx(
                sites.data[k], abs=1e-8)

    def test_nugget_carried_at_data_sites(self, rng):
        sites = SiteSet(rng.uniform(size=(6, 2)), rng.normal(size=6))
        theta = ParamVector(0.3, 1.0, 0.2)
        np.testing.assert_allclose(krige(sites, "exponential", theta, sites.coords), sites.data, atol=1e-10)

    @pytest.mark.parametrize("family", list(CorrelationFamily))
    def test_far_target_is_prior_mean(self, rng, family):
        sites = SiteSet(rng.uniform(size=(10, 2)), rng.normal(size=10))
        value = simple_kriging(sites, family, ParamVector(0.1, 1.0, 0.1), np.array([1e6, 1e6]))
        assert value == pytest.approx(0.0, abs=1e-10)

    def test_single_site(self):
        sites = SiteSet(np.array([[0.0, 0.0]]), np.array([2.0]))
        theta = ParamVector(0.5, 1.5, 0.2)
        h = 0.05
        expected = 1.5 * correlate(CorrelationFamily.MATERN15, h, 0.2) / (1.5 + 0.5) * 2.0
        assert simple_kriging(sites, "matern15", theta, [h, 0.0]) == pytest.approx(expected)

    def test_linear_in_data(self, rng):
        coords = rng.uniform(size=(12, 2))
        z1, z2 = rng.normal(size=12), rng.normal(size=12)
        targets = rng.uniform(size=(5, 2))
        theta = ParamVector(0.1, 1.0, 0.2)
        combined = krige(SiteSet(coords, 2 * z1 - 3 * z2), "cauchy", theta, targets)
        separate = 2 * krige(SiteSet(coords, z1), "cauchy", theta, targets) - 3 * krige(
            SiteSet(coords, z2), "cauchy", theta, targets)
        np.testing.assert_allclose(combined, separate, atol=1e-10)

    def test_rejects_non_finite_target(self, small_sites, theta):
        with pytest.raises(ValueError):
            simple_kriging(small_sites, "exponential", theta, [np.inf, 0.0])


class TestLeaveOneOut:
    def test_single_site(self):
        sites = SiteSet(np.array([[0.3, 0.3]]), np.array([-1.7]))
        assert loo_rmse(sites, "exponential", ParamVector(0.1, 1.0, 0.1)) == pytest.approx(1.7)

    def test_two_sites(self):
        sites = SiteSet(np.array([[0.0, 0.0], [0.1, 0.0]]), np.array([1.0, -1.0]))
        theta = ParamVector(0.0, 1.0, 0.3)
        rho = correlate(CorrelationFamily.EXPONENTIAL, 0.1, 0.3)
        # each fold predicts rho times the other datum
        assert loo_rmse(sites, "exponential", theta) == pytest.approx(1.0 + rho)

    def test_order_invariant(self, rng, small_sites, theta):
        perm = rng.permutation(small_sites.n)
        shuffled = small_sites.subset(perm)
        assert loo_rmse(shuffled, "exponential", theta) == pytest.approx(
            loo_rmse(small_sites, "exponential", theta), rel=1e-10)

    def test_threads_agree(self, small_sites, theta):
        assert loo_rmse(small_sites, "exponential", theta, threads=2) == pytest.approx(
            loo_rmse(small_sites, "exponential", theta, threads=1), rel=1e-12)

    def test_subsample(self, small_sites, theta):
        value = loo_rmse(small_sites, "exponential", theta, subsample=10, rng=np.random.default_rng(0))
        again = loo_rmse(small_sites, "exponential", theta, subsample=10, rng=np.random.default_rng(0))
        assert value == again
        assert value > 0

    @pytest.mark.parametrize("family", list(CorrelationFamily))
    def test_below_marginal_sd(self, family):
        rng = np.random.default_rng(31)
        theta = ParamVector(0.05, 1.0, 0.3)
        sites = simulate_field(generate_perturbed_grid(225, rng), family, theta, rng)
        value = loo_rmse(sites, family, theta, subsample=60, rng=rng, threads=1)
        assert value < 0.9 * np.sqrt(theta.sill)

    def test_subsample_needs_rng(self, small_sites, theta):
        with pytest.raises(ValueError):
            loo_rmse(small_sites, "exponential", theta, subsample=10)


class TestSemivariogram:
    def test_constant_field(self, rng):
        sites = SiteSet(rng.uniform(size=(50, 2)), np.full(50, 3.0))
        est = empirical_semivariogram(sites)
        filled = est.counts > 0
        np.testing.assert_array_equal(est.semivariance[filled], 0.0)

    def test_two_sites(self):
        sites = SiteSet(np.array([[0.0, 0.0], [0.4, 0.0]]), np.array([1.0, 4.0]))
        est = empirical_semivariogram(sites, n_bins=4, max_lag=1.0)
        np.testing.assert_array_equal(est.counts, [0, 1, 0, 0])
        assert est.semivariance[1] == pytest.approx(4.5)
        assert np.isnan(est.semivariance[[0, 2, 3]]).all()

    def test_right_closed_bins(self):
        sites = SiteSet(np.array([[0.0, 0.0], [0.25, 0.0]]), np.array([0.0, 1.0]))
        est = empirical_semivariogram(sites, n_bins=4, max_lag=1.0)
        np.testing.assert_array_equal(est.counts, [1, 0, 0, 0])

    def test_pairs_beyond_max_lag_ignored(self):
        sites = SiteSet(np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([0.0, 1.0]))
        assert empirical_semivariogram(sites, n_bins=3, max_lag=1.0).counts.sum() == 0

    def test_default_max_lag(self):
        sites = SiteSet(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), np.array([0.0, 1.0, 2.0]))
        est = empirical_semivariogram(sites, n_bins=2)
        np.testing.assert_allclose(est.bin_centers, [0.25, 0.75])
        np.testing.assert_array_equal(est.counts, [0, 2])

    def test_shift_invariant(self, small_sites):
        shifted = small_sites.with_data(small_sites.data + 7.5)
        np.testing.assert_allclose(
            empirical_semivariogram(shifted).semivariance,
            empirical_semivariogram(small_sites).semivariance, rtol=1e-10)

    def test_chunking(self, monkeypatch, small_sites):
        whole = empirical_semivariogram(small_sites, max_lag=0.5)
        monkeypatch.setattr(predict, "ROW_CHUNK", 7)
        chunked = empirical_semivariogram(small_sites, max_lag=0.5)
        np.testing.assert_array_equal(chunked.counts, whole.counts)
        np.testing.assert_allclose(chunked.semivariance, whole.semivariance, rtol=1e-12)

    def test_white_noise_matches_variance(self, rng):
        n = 1500
        sites = SiteSet(rng.uniform(size=(n, 2)), rng.normal(scale=np.sqrt(2.0), size=n))
        est = empirical_semivariogram(sites)
        assert np.all(est.counts > 0)
        np.testing.assert_allclose(est.semivariance, 2.0, rtol=0.15)
        assert np.mean(est.semivariance) == pytest.approx(2.0, rel=0.05)

    @pytest.mark.parametrize("kwargs", [{"n_bins": 0}, {"max_lag": 0.0}])
    def test_invalid(self, small_sites, kwargs):
        with pytest.raises(ValueError):
            empirical_semivariogram(small_sites, **kwargs)

    def test_too_few_sites(self):
        with pytest.raises(ValueError):
            empirical_semivariogram(SiteSet(np.zeros((1, 2)), np.zeros(1)))

    def test_frame(self, small_sites):
        frame = empirical_semivariogram(small_sites, n_bins=5).to_frame()
        assert list(frame.columns) == ["bin_center", "semivariance", "count"]
        assert len(frame) == 5

    def test_centers_must_increase(self):
        with pytest.raises(ValueError):
            VariogramEstimate(np.array([0.2, 0.1]), np.zeros(2), np.zeros(2, dtype=int))


class TestOverlay:
    def test_curve(self):
        theta = ParamVector(0.2, 1.0, 0.1)
        frame = semivariogram_overlay("exponential", theta, max_lag=2.0, points=50)
        assert list(frame.columns) == ["h", "gamma_model"]
        assert len(frame) == 50
        assert frame["h"].iloc[-1] == pytest.approx(2.0)
        assert np.all(np.diff(frame["gamma_model"]) >= 0)
        assert frame["gamma_model"].iloc[-1] == pytest.approx(theta.sill)
