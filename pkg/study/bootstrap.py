"""
Parametric bootstrap standard errors.

B datasets are simulated from the fitted model on the observed sites and
refitted with the same estimator; the element-wise sample standard
deviations of the B estimates are the standard errors.
"""
from dataclasses import dataclass
import logging
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from core import ParamVector, GeolikError, BootstrapFailure
from data.sites import pairwise_distances
from dense import cholesky, sample_gaussian
from estimators.base import BaseEstimator
from models import covariance_matrix
from optim import OptimOptions

logger = logging.getLogger(__name__)

DEFAULT_REPLICATES = 100


@dataclass
class BootstrapResult:
    """
    Bootstrap output.

    Attributes:
        theta_hat: Parameters the datasets were simulated from
        standard_errors: Parameter name -> sample standard deviation of the refits
        estimates: (B_ok, 3) refitted parameters ordered (tau2, sigma2, range)
        failures: Number of refits that failed
    """
    theta_hat: ParamVector
    standard_errors: Dict[str, float]
    estimates: np.ndarray
    failures: int

    @property
    def replicates(self) -> int:
        return len(self.estimates) + self.failures

    def to_frame(self) -> pd.DataFrame:
        """Refitted estimates, one row per successful replicate."""
        return pd.DataFrame(self.estimates, columns=list(ParamVector.NAMES))

    def to_dict(self) -> Dict:
        return {
            "theta_hat": self.theta_hat.to_dict(),
            "standard_errors": self.standard_errors,
            "replicates": self.replicates,
            "failures": self.failures,
        }


def parametric_bootstrap(
    estimator: BaseEstimator,
    theta_hat: ParamVector,
    rng: np.random.Generator,
    replicates: int = DEFAULT_REPLICATES,
    options: Optional[OptimOptions] = None,
    threads: Optional[int] = None
) -> BootstrapResult:
    """
    Standard errors of an estimator by simulation from its fit.

    Every refit starts from theta_hat unless ``options`` says otherwise.

    Args:
        estimator: Estimator bound to the observed sites (partitions reused)
        theta_hat: Fitted parameters
        rng: Random generator; one child stream per replicate
        replicates: Number of bootstrap datasets B (default: 100)
        options: Optimizer options for the refits
        threads: Worker count (None = all cores)

    Returns:
        BootstrapResult

    Raises:
        ValueError: If replicates < 2
        BootstrapFailure: If fewer than B/2 refits succeed
    """
    if replicates < 2:
        raise ValueError(f"replicates must be >= 2, got {replicates}")
    if options is None:
        options = OptimOptions(initial=theta_hat)

    cov = covariance_matrix(estimator.family, pairwise_distances(estimator.sites.coords), theta_hat)
    factor = cholesky(cov)
    streams = rng.spawn(replicates)

    def refit(stream: np.random.Generator) -> Optional[np.ndarray]:
        z = sample_gaussian(factor, stream)
        try:
            return estimator.with_data(z).fit(options).theta_hat.to_array()
        except GeolikError as e:
            logger.warning("Bootstrap refit failed: %s", e)
            return None

    if threads == 1:
        fits: List[Optional[np.ndarray]] = [refit(s) for s in streams]
    else:
        fits = Parallel(n_jobs=threads or -1, prefer="threads")(delayed(refit)(s) for s in streams)

    ok = [f for f in fits if f is not None]
    failures = replicates - len(ok)
    if len(ok) < max(2.0, replicates / 2):
        raise BootstrapFailure(f"Only {len(ok)} of {replicates} bootstrap refits succeeded")
    if failures:
        logger.warning("%d of %d bootstrap refits failed", failures, replicates)

    estimates = np.array(ok)
    sd = np.std(estimates, axis=0, ddof=1)
    return BootstrapResult(
        theta_hat=theta_hat,
        standard_errors={name: float(v) for name, v in zip(ParamVector.NAMES, sd)},
        estimates=estimates,
        failures=failures,
    )
