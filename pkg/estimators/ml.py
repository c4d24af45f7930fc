"""
Full Gaussian likelihood.
"""
from core import SiteSet, ParamVector
from data.sites import pairwise_distances
from dense import gaussian_loglik
from estimators.base import BaseEstimator
from models import CorrelationFamily, covariance_matrix


class MLEstimator(BaseEstimator):
    """
    Exact log-likelihood -1/2 (log|sigma2 R + tau2 I| + Z' [sigma2 R + tau2 I]^{-1} Z).

    The 2*pi constant is omitted. Sites must be pairwise distinct.
    """

    method = "ml"

    def __init__(self, sites: SiteSet, family: CorrelationFamily):
        super().__init__(sites, family)
        if sites.n < 1:
            raise ValueError("Full likelihood needs at least one site")
        sites.check_distinct()
        self._distances = pairwise_distances(sites.coords)

    def objective(self, theta: ParamVector) -> float:
        cov = covariance_matrix(self.family, self._distances, theta)
        return gaussian_loglik(cov, self.z)


def full_loglik(sites: SiteSet, family: CorrelationFamily, theta: ParamVector) -> float:
    """Full log-likelihood (constants omitted) of the data in sites."""
    return MLEstimator(sites, family).objective(theta)
