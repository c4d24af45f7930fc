"""Tests for efficiency metrics, the Monte Carlo engine, bootstrap and timing."""
import json

import numpy as np
import pandas as pd
import pytest

from core import ParamVector, EstimateResult, EvaluationInfeasible, GeolikError, SingularMoment, BootstrapFailure
from config.manager import StudyConfig, MethodSpec
from data.sites import pairwise_distances
from dense import cholesky, sample_gaussian
from estimators.pcl import PairwiseEstimator
from models import CorrelationFamily, covariance_matrix
from study import (
    StudyEngine, run_study, relative_rrmse, global_efficiency, parametric_bootstrap, bench_timing,
)
from study.engine import moment_matrix, TABLE_ROWS

TRUTH = ParamVector(0.1, 1.0, 0.1)


@pytest.fixture
def ml_draws(rng):
    return TRUTH.to_array() + rng.normal(scale=[0.02, 0.2, 0.01], size=(100, 3))


class TestRelativeRmse:
    def test_identical_is_one(self, ml_draws):
        np.testing.assert_allclose(relative_rrmse(ml_draws, ml_draws, TRUTH), 1.0)

    def test_doubled_errors_halve(self, ml_draws):
        worse = TRUTH.to_array() + 2 * (ml_draws - TRUTH.to_array())
        np.testing.assert_allclose(relative_rrmse(worse, ml_draws, TRUTH), 0.5)

    def test_exact_method(self, ml_draws):
        exact = np.tile(TRUTH.to_array(), (100, 1))
        assert np.all(np.isinf(relative_rrmse(exact, ml_draws, TRUTH)))
        np.testing.assert_array_equal(relative_rrmse(exact, exact, TRUTH), 1.0)

    def test_shape_mismatch(self, ml_draws):
        with pytest.raises(ValueError):
            relative_rrmse(ml_draws[:50], ml_draws, TRUTH)


class TestGlobalEfficiency:
    def test_identical_is_one(self, ml_draws):
        assert global_efficiency(ml_draws, ml_draws, TRUTH) == pytest.approx(1.0)

    @pytest.mark.parametrize("c", [0.5, 2.0, 4.0])
    def test_scaled_moment(self, ml_draws, c):
        method = TRUTH.to_array() + np.sqrt(c) * (ml_draws - TRUTH.to_array())
        np.testing.assert_allclose(moment_matrix(method, TRUTH), c * moment_matrix(ml_draws, TRUTH))
        assert global_efficiency(method, ml_draws, TRUTH) == pytest.approx(c ** -0.5, rel=1e-10)

    def test_replicate_order_invariant(self, rng, ml_draws):
        method = ml_draws + rng.normal(scale=0.01, size=ml_draws.shape)
        perm = rng.permutation(len(ml_draws))
        assert global_efficiency(method[perm], ml_draws[perm], TRUTH) == pytest.approx(
            global_efficiency(method, ml_draws, TRUTH), rel=1e-12)

    def test_unit_rescaling_invariant(self, rng, ml_draws):
        method = ml_draws + rng.normal(scale=0.01, size=ml_draws.shape)
        scale = np.array([10.0, 0.5, 1000.0])
        base = global_efficiency(method, ml_draws, TRUTH)
        rescaled = global_efficiency(method * scale, ml_draws * scale, TRUTH.to_array() * scale)
        assert rescaled == pytest.approx(base, rel=1e-9)
        np.testing.assert_allclose(
            relative_rrmse(method * scale, ml_draws * scale, TRUTH.to_array() * scale),
            relative_rrmse(method, ml_draws, TRUTH), rtol=1e-12)

    def test_singular(self, ml_draws):
        with pytest.raises(SingularMoment):
            global_efficiency(ml_draws[:2], ml_draws[:2], TRUTH)

    @pytest.mark.parametrize("replicates", [1, 2])
    def test_fewer_replicates_than_parameters(self, ml_draws, replicates):
        with pytest.raises(SingularMoment):
            global_efficiency(ml_draws[:replicates], ml_draws, TRUTH)

    def test_three_replicates_span_all_parameters(self, ml_draws):
        # deviations are taken about the truth, not the replicate mean
        assert np.isfinite(global_efficiency(ml_draws[:3], ml_draws[:3], TRUTH))

    def test_parameter_pinned_at_truth(self, ml_draws):
        pinned = ml_draws.copy()
        pinned[:, 0] = TRUTH.tau2
        with pytest.raises(SingularMoment):
            global_efficiency(pinned, ml_draws, TRUTH)


def _study(**overrides) -> StudyConfig:
    settings = dict(
        name="unit",
        family="exponential",
        theta_true=TRUTH,
        n=20,
        replicates=4,
        seed=7,
        site_scheme="uniform",
        max_iterations=300,
        tolerance=1e-8,
        methods=[
            MethodSpec("ml", "ml"),
            MethodSpec("pcl_a", "pcl", ds=0.4),
            MethodSpec("pcl_b", "pcl", ds=0.4),
            MethodSpec("bicl", "bicl", ds=0.4, configurations=2),
        ],
    )
    settings.update(overrides)
    return StudyConfig(**settings)


class TestStudyEngine:
    def test_shapes(self):
        result = run_study(_study(), threads=1)
        assert list(result.replicate_ids) == [0, 1, 2, 3]
        for label in result.labels:
            assert result.estimates[label].shape == (4, 3)
            assert result.iterations[label].shape == (4,)
        assert result.compared == ["pcl_a", "pcl_b", "bicl"]

    def test_reproducible(self):
        a = run_study(_study(), threads=1)
        b = run_study(_study(), threads=1)
        for label in a.labels:
            np.testing.assert_array_equal(a.estimates[label], b.estimates[label])

    def test_threads_match_sequential(self):
        a = run_study(_study(), threads=1)
        b = run_study(_study(), threads=2)
        for label in a.labels:
            np.testing.assert_array_equal(a.estimates[label], b.estimates[label])

    def test_duplicate_methods_identical(self):
        result = run_study(_study(), threads=1)
        np.testing.assert_array_equal(result.estimates["pcl_a"], result.estimates["pcl_b"])

    @pytest.mark.parametrize("fixed_sites", [True, False])
    def test_replicate_depends_only_on_seed_and_index(self, fixed_sites):
        short = run_study(_study(replicates=2, fixed_sites=fixed_sites), threads=1)
        long = run_study(_study(replicates=4, fixed_sites=fixed_sites), threads=1)
        for label in short.labels:
            np.testing.assert_array_equal(short.estimates[label], long.estimates[label][:2])
        engine = StudyEngine(_study(replicates=4, fixed_sites=fixed_sites), threads=1)
        _, fits, _ = engine.run_replicate(3)
        np.testing.assert_array_equal(fits[0].theta_hat.to_array(), long.estimates["ml"][3])

    def test_seed_changes_estimates(self):
        a = run_study(_study(), threads=1)
        b = run_study(_study(seed=8), threads=1)
        assert not np.array_equal(a.estimates["ml"], b.estimates["ml"])

    def test_redrawn_sites(self):
        result = run_study(_study(fixed_sites=False, replicates=3), threads=1)
        assert result.estimates["ml"].shape == (3, 3)

    def test_start_from_truth(self):
        result = run_study(_study(start="truth", replicates=2), threads=1)
        assert np.all(np.isfinite(result.estimates["bicl"]))

    def test_efficiency_table(self):
        table = run_study(_study(), threads=1).efficiency_table()
        assert list(table.index) == list(TABLE_ROWS) + ["global"]
        assert list(table.columns) == ["pcl_a", "pcl_b", "bicl"]
        assert np.all(table.loc["sigma2"] > 0)

    def test_two_replicates_leave_global_row_empty(self):
        table = run_study(_study(replicates=2), threads=1).efficiency_table()
        assert table.loc["global"].isna().all()
        assert np.all(np.isfinite(table.loc["sigma2"]))

    def test_save(self, tmp_path):
        result = run_study(_study(), threads=1)
        paths = result.save(tmp_path)
        assert [p.name for p in paths] == ["efficiency.csv", "replicates.csv", "summary.json"]
        replicates = pd.read_csv(tmp_path / "replicates.csv")
        assert len(replicates) == 4 * 4
        assert set(replicates.columns) == {"replicate", "method", "tau2", "sigma2", "range", "iterations", "converged"}
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["benchmark"] == "ml"
        assert summary["replicates_kept"] == 4
        assert "Relative efficiency" in result.summary()

    def test_failing_replicates_dropped(self, monkeypatch):
        engine = StudyEngine(_study(), threads=1)
        original = engine.run_replicate

        def flaky(r):
            if r == 1:
                return r, None, "NotPositiveDefinite: boom"
            return original(r)

        monkeypatch.setattr(engine, "run_replicate", flaky)
        result = engine.run()
        assert list(result.replicate_ids) == [0, 2, 3]
        assert result.failures == {1: "NotPositiveDefinite: boom"}
        assert all(est.shape == (3, 3) for est in result.estimates.values())

    def test_all_replicates_failing(self, monkeypatch):
        engine = StudyEngine(_study(), threads=1)
        monkeypatch.setattr(engine, "run_replicate", lambda r: (r, None, "boom"))
        with pytest.raises(GeolikError):
            engine.run()


class FixedEstimator(PairwiseEstimator):
    """Returns its starting point without optimizing."""

    def fit(self, options=None):
        return EstimateResult(theta_hat=options.initial, objective_value=0.0, iterations=0, converged=True)


class MomentEstimator(PairwiseEstimator):
    """Moment fit of sigma2 with tau2 and range held at the start."""

    def fit(self, options=None):
        start = options.initial
        sigma2 = max(float(np.mean(self.z ** 2)) - start.tau2, 1e-6)
        theta = ParamVector(start.tau2, sigma2, start.range)
        return EstimateResult(theta_hat=theta, objective_value=0.0, iterations=0, converged=True)


class FailingEstimator(PairwiseEstimator):
    def fit(self, options=None):
        raise EvaluationInfeasible("refit failed")


class TestBootstrap:
    def test_degenerate_estimator_has_zero_errors(self, small_sites):
        est = FixedEstimator(small_sites, "exponential", 0.3)
        result = parametric_bootstrap(est, TRUTH, np.random.default_rng(3), replicates=5, threads=1)
        assert result.standard_errors == {"tau2": 0.0, "sigma2": 0.0, "range": 0.0}
        assert result.replicates == 5
        assert result.failures == 0

    def test_standard_errors(self, small_sites):
        est = PairwiseEstimator(small_sites, "exponential", 0.3)
        theta_hat = ParamVector(0.1, 1.0, 0.3)
        a = parametric_bootstrap(est, theta_hat, np.random.default_rng(11), replicates=4, threads=1)
        b = parametric_bootstrap(est, theta_hat, np.random.default_rng(11), replicates=4, threads=2)
        assert all(v > 0 and np.isfinite(v) for v in a.standard_errors.values())
        np.testing.assert_array_equal(a.estimates, b.estimates)
        assert list(a.to_frame().columns) == ["tau2", "sigma2", "range"]
        assert a.to_dict()["replicates"] == 4

    def test_matches_monte_carlo_spread(self, small_sites):
        theta = ParamVector(0.1, 1.0, 0.3)
        est = MomentEstimator(small_sites, "exponential", 0.3)
        boot = parametric_bootstrap(est, theta, np.random.default_rng(21), replicates=400, threads=1)

        factor = cholesky(covariance_matrix(CorrelationFamily.EXPONENTIAL, pairwise_distances(small_sites.coords), theta))
        rng = np.random.default_rng(22)
        draws = [np.mean(sample_gaussian(factor, rng) ** 2) - theta.tau2 for _ in range(400)]

        assert boot.standard_errors["sigma2"] == pytest.approx(np.std(draws, ddof=1), rel=0.25)
        assert boot.standard_errors["tau2"] == 0.0
        assert boot.standard_errors["range"] == 0.0

    def test_too_few_replicates(self, small_sites):
        est = FixedEstimator(small_sites, "exponential", 0.3)
        with pytest.raises(ValueError):
            parametric_bootstrap(est, TRUTH, np.random.default_rng(0), replicates=1)

    def test_failure(self, small_sites):
        est = FailingEstimator(small_sites, "exponential", 0.3)
        with pytest.raises(BootstrapFailure):
            parametric_bootstrap(est, TRUTH, np.random.default_rng(0), replicates=4, threads=1)


class TestTiming:
    def test_columns(self, rng):
        frame = bench_timing([32, 64], rng, ds=0.3)
        assert list(frame["n"]) == [32, 64]
        assert list(frame.columns) == [
            "n", "bicl_setup_seconds", "bicl_eval_seconds", "bicl_seconds",
            "bcl8_bound_seconds", "bcl16_bound_seconds",
        ]
        assert np.all(frame.drop(columns="n").to_numpy() >= 0)
        np.testing.assert_allclose(frame["bicl_seconds"], frame["bicl_setup_seconds"] + frame["bicl_eval_seconds"])

    def test_without_bounds(self, rng):
        frame = bench_timing([16], rng, ds=0.5, include_bounds=False)
        assert frame["bcl8_bound_seconds"].isna().all()

    def test_progress_callback(self, rng):
        rows = []
        bench_timing([16], rng, ds=0.5, include_bounds=False, progress=rows.append)
        assert rows[0]["n"] == 16

    def test_too_small(self, rng):
        with pytest.raises(ValueError):
            bench_timing([4], rng)
        with pytest.raises(ValueError):
            bench_timing([16], rng, eval_repeats=0)
