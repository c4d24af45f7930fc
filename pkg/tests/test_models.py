"""Tests for models."""
import numpy as np
import pytest

from core import ParamVector, ConfigError
from models import (
    CorrelationFamily, correlate, covariance, covariance_matrix, semivariogram_model,
    EXPONENTIAL_SCALE,
)

FAMILIES = list(CorrelationFamily)


class TestParse:
    def test_tokens(self):
        assert CorrelationFamily.parse("Matern15") is CorrelationFamily.MATERN15
        assert CorrelationFamily.parse(CorrelationFamily.CAUCHY) is CorrelationFamily.CAUCHY

    def test_unknown_token(self):
        with pytest.raises(ConfigError):
            CorrelationFamily.parse("gaussian")


class TestCorrelate:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_unit_at_origin(self, family):
        assert correlate(family, 0.0, 0.1) == 1.0

    @pytest.mark.parametrize("family", FAMILIES)
    def test_practical_range(self, family):
        """Correlation at the practical range is about 0.05."""
        assert correlate(family, 0.1, 0.1) == pytest.approx(0.05, abs=1e-3)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_decreasing(self, family):
        h = np.linspace(0.0, 1.0, 200)
        rho = correlate(family, h, 0.2)
        assert np.all(np.diff(rho) < 0)
        assert np.all((rho > 0) & (rho <= 1))

    def test_exponential_closed_form(self):
        assert correlate(CorrelationFamily.EXPONENTIAL, 0.05, 0.1) == pytest.approx(np.exp(-EXPONENTIAL_SCALE * 0.5))

    def test_matern_closed_form(self):
        t = 4.7619 * 0.03 / 0.1
        assert correlate(CorrelationFamily.MATERN15, 0.03, 0.1) == pytest.approx(np.exp(-t) * (1 + t))

    def test_cauchy_closed_form(self):
        t = 4.3588 * 0.02 / 0.1
        assert correlate(CorrelationFamily.CAUCHY, 0.02, 0.1) == pytest.approx(1 / (1 + t * t))

    def test_scalar_returns_float(self):
        assert isinstance(correlate(CorrelationFamily.EXPONENTIAL, 0.2, 0.1), float)

    def test_nonpositive_range(self):
        with pytest.raises(ValueError):
            correlate(CorrelationFamily.EXPONENTIAL, 0.1, 0.0)

    def test_negative_distance(self):
        with pytest.raises(ValueError):
            correlate(CorrelationFamily.EXPONENTIAL, np.array([0.1, -0.1]), 0.1)


class TestCovariance:
    def test_nugget_only_at_origin(self):
        theta = ParamVector(0.3, 2.0, 0.1)
        assert covariance(CorrelationFamily.EXPONENTIAL, 0.0, theta) == pytest.approx(2.3)
        assert covariance(CorrelationFamily.EXPONENTIAL, 1e-9, theta) == pytest.approx(2.0, rel=1e-6)

    def test_matrix_diagonal(self):
        theta = ParamVector(0.1, 1.0, 0.2)
        d = np.array([[0.0, 0.1], [0.1, 0.0]])
        cov = covariance_matrix(CorrelationFamily.CAUCHY, d, theta)
        np.testing.assert_allclose(np.diag(cov), [1.1, 1.1])
        assert cov[0, 1] == pytest.approx(correlate(CorrelationFamily.CAUCHY, 0.1, 0.2))

    def test_matrix_must_be_square(self):
        with pytest.raises(ValueError):
            covariance_matrix(CorrelationFamily.EXPONENTIAL, np.zeros((2, 3)), ParamVector(0.1, 1.0, 0.1))


class TestSemivariogramModel:
    def test_zero_at_origin(self):
        assert semivariogram_model(CorrelationFamily.EXPONENTIAL, 0.0, ParamVector(0.2, 1.0, 0.1)) == 0.0

    def test_approaches_sill(self):
        theta = ParamVector(0.2, 1.0, 0.1)
        assert semivariogram_model(CorrelationFamily.EXPONENTIAL, 10.0, theta) == pytest.approx(1.2)

    def test_nugget_jump(self):
        theta = ParamVector(0.2, 1.0, 0.1)
        assert semivariogram_model(CorrelationFamily.MATERN15, 1e-12, theta) == pytest.approx(0.2, abs=1e-9)
