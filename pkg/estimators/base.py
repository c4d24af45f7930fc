"""
Base estimator class that all likelihood objectives implement.

An estimator binds a site set (with data) and a correlation family,
precomputes whatever geometry its objective needs, and maximizes the
objective over theta = (tau2, sigma2, range) with the log-space
Nelder-Mead optimizer.
"""
from abc import ABC, abstractmethod
import copy
import logging
from typing import Optional

import numpy as np

from core import SiteSet, ParamVector, EstimateResult
from models import CorrelationFamily
from optim import OptimOptions, nelder_mead_maximize

logger = logging.getLogger(__name__)

DEFAULT_NUGGET = 0.05
DEFAULT_RANGE_FRACTION = 0.1


class BaseEstimator(ABC):
    """
    Abstract base class for all objectives.

    Subclasses compute geometry in ``__init__`` from ``sites.coords`` only,
    so that ``with_data`` can swap the data vector without recomputation.

    Attributes:
        method: Registry token of the method
        sites: Site set with data
        family: Correlation family

    Example:
        >>> est = get_estimator("pcl", sites, CorrelationFamily.EXPONENTIAL, ds=0.1)
        >>> result = est.fit(OptimOptions(initial=est.default_start()))
    """

    method: str = ""

    def __init__(self, sites: SiteSet, family: CorrelationFamily):
        """
        Initialize estimator.

        Args:
            sites: Site set; a data vector is required before evaluation
            family: Correlation family
        """
        self.sites = sites
        self.family = CorrelationFamily.parse(family)

    @property
    def z(self) -> np.ndarray:
        """Bound data vector; raises DataError when the sites carry none."""
        return self.sites.require_data()

    @abstractmethod
    def objective(self, theta: ParamVector) -> float:
        """
        Evaluate the objective at theta.

        Raises:
            EvaluationInfeasible: If the objective is undefined at theta
        """

    def __call__(self, theta: ParamVector) -> float:
        """Same as objective."""
        return self.objective(theta)

    def with_data(self, data: np.ndarray) -> "BaseEstimator":
        """
        Shallow copy bound to a new data vector on the same sites.

        Cached geometry is shared with the original.
        """
        clone = copy.copy(self)
        clone.sites = self.sites.with_data(data)
        return clone

    def default_start(self) -> ParamVector:
        """
        Starting point (0.05, sample variance, 10% of the bounding-box diagonal).
        """
        z = self.z
        variance = float(np.var(z, ddof=1)) if len(z) > 1 else float(z[0] ** 2)
        diameter = self.sites.diameter_hint()
        return ParamVector(
            tau2=DEFAULT_NUGGET,
            sigma2=variance if variance > 0 else 1.0,
            range=DEFAULT_RANGE_FRACTION * diameter if diameter > 0 else 1.0,
        )

    def fit(self, options: Optional[OptimOptions] = None) -> EstimateResult:
        """
        Maximize the objective.

        Args:
            options: Optimizer options; the default start is used when omitted

        Returns:
            EstimateResult
        """
        if options is None:
            options = OptimOptions(initial=self.default_start())
        result = nelder_mead_maximize(self.objective, options)
        logger.debug(
            "%s fit: theta=%s value=%.6f iterations=%d converged=%s",
            self.method, result.theta_hat.to_dict(), result.objective_value,
            result.iterations, result.converged
        )
        return result

    def describe(self) -> dict:
        """Method-specific settings for manifests and reports."""
        return {"method": self.method, "family": self.family.value}
