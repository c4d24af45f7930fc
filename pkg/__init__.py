"""
geolik: composite likelihood estimation for Gaussian random fields.
"""

from core import ParamVector, SiteSet, PairConfiguration, BlockPartition, EstimateResult, RunManifest
from models import CorrelationFamily, correlate, covariance, covariance_matrix
from config.manager import MethodSpec, StudyConfig, ConfigManager
from estimators import get_estimator, build_estimator, list_estimators
from estimators.base import BaseEstimator
from optim import OptimOptions, nelder_mead_maximize
from study.engine import StudyEngine, StudyResult, run_study
from study.bootstrap import parametric_bootstrap
from predict import simple_kriging, loo_rmse, empirical_semivariogram

__all__ = [
    "ParamVector",
    "SiteSet",
    "PairConfiguration",
    "BlockPartition",
    "EstimateResult",
    "RunManifest",
    "CorrelationFamily",
    "correlate",
    "covariance",
    "covariance_matrix",
    "MethodSpec",
    "StudyConfig",
    "ConfigManager",
    "get_estimator",
    "build_estimator",
    "list_estimators",
    "BaseEstimator",
    "OptimOptions",
    "nelder_mead_maximize",
    "StudyEngine",
    "StudyResult",
    "run_study",
    "parametric_bootstrap",
    "simple_kriging",
    "loo_rmse",
    "empirical_semivariogram",
]
