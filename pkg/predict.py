"""
Simple kriging, leave-one-out validation and empirical semi-variograms.
"""
from dataclasses import dataclass
import logging
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.spatial.distance import cdist

from core import SiteSet, ParamVector
from data.sites import pairwise_distances
from dense import cholesky, solve_spd
from models import CorrelationFamily, covariance, covariance_matrix, semivariogram_model

logger = logging.getLogger(__name__)

DEFAULT_BINS = 15
ROW_CHUNK = 2048


def krige(
    sites: SiteSet,
    family: CorrelationFamily,
    theta: ParamVector,
    targets: np.ndarray
) -> np.ndarray:
    """
    Zero-mean simple kriging predictions c' K^{-1} Z at several targets.

    K carries the nugget on its diagonal. The cross-covariance carries it
    only where a target coincides with a data site.

    Args:
        sites: Site set with data
        family: Correlation family
        theta: Parameters
        targets: (m, 2) prediction locations

    Returns:
        (m,) predictions

    Raises:
        ValueError: If a target is not finite
        NotPositiveDefinite: If K cannot be factored
    """
    family = CorrelationFamily.parse(family)
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    if not np.all(np.isfinite(targets)):
        raise ValueError("Prediction targets must be finite")
    if sites.n == 0:
        return np.zeros(len(targets))

    z = sites.require_data()
    factor = cholesky(covariance_matrix(family, pairwise_distances(sites.coords), theta))
    weights = solve_spd(factor, z)
    cross = np.asarray(covariance(family, cdist(targets, sites.coords), theta))
    return cross @ weights


def simple_kriging(
    sites: SiteSet,
    family: CorrelationFamily,
    theta: ParamVector,
    target: np.ndarray
) -> float:
    """Simple kriging prediction at a single point."""
    return float(krige(sites, family, theta, np.asarray(target, dtype=float).reshape(1, 2))[0])


def _loo_residual(sites: SiteSet, family: CorrelationFamily, theta: ParamVector, k: int) -> float:
    others = np.delete(np.arange(sites.n), k)
    prediction = simple_kriging(sites.subset(others), family, theta, sites.coords[k])
    return float(sites.data[k] - prediction)


def loo_rmse(
    sites: SiteSet,
    family: CorrelationFamily,
    theta: ParamVector,
    subsample: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    threads: Optional[int] = 1
) -> float:
    """
    Leave-one-out RMSE of simple kriging.

    Each fold factors its own (n-1) x (n-1) covariance. With a single site
    the prediction is the prior mean 0 and the RMSE is |Z_1|.

    Args:
        sites: Site set with data
        family: Correlation family
        theta: Parameters
        subsample: Number of left-out sites drawn at random (None = all)
        rng: Random generator, required with subsample
        threads: Worker count for folds (None = all cores)

    Returns:
        sqrt(mean of squared LOO residuals)

    Raises:
        ValueError: If subsample is given without rng or exceeds n
    """
    family = CorrelationFamily.parse(family)
    z = sites.require_data()
    if sites.n == 0:
        raise ValueError("Leave-one-out needs at least one site")

    folds = np.arange(sites.n)
    if subsample is not None and subsample < sites.n:
        if rng is None:
            raise ValueError("Subsampled leave-one-out needs a random generator")
        if subsample < 1:
            raise ValueError(f"subsample must be >= 1, got {subsample}")
        folds = np.sort(rng.choice(sites.n, size=subsample, replace=False))

    if sites.n == 1:
        return float(abs(z[0]))

    if threads == 1:
        residuals = [_loo_residual(sites, family, theta, int(k)) for k in folds]
    else:
        residuals = Parallel(n_jobs=threads or -1, prefer="threads")(
            delayed(_loo_residual)(sites, family, theta, int(k)) for k in folds
        )
    return float(np.sqrt(np.mean(np.square(residuals))))


@dataclass
class VariogramEstimate:
    """
    Binned empirical semi-variogram.

    Attributes:
        bin_centers: Midpoints of the equal-width bins
        semivariance: Estimate per bin (NaN where the bin is empty)
        counts: Number of site pairs per bin
    """
    bin_centers: np.ndarray
    semivariance: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.bin_centers) <= 0):
            raise ValueError("Bin centers must be strictly increasing")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "bin_center": self.bin_centers,
            "semivariance": self.semivariance,
            "count": self.counts,
        })


def _max_distance(coords: np.ndarray) -> float:
    best = 0.0
    for start in range(0, len(coords), ROW_CHUNK):
        best = max(best, float(cdist(coords[start:start + ROW_CHUNK], coords).max()))
    return best


def empirical_semivariogram(
    sites: SiteSet,
    n_bins: int = DEFAULT_BINS,
    max_lag: Optional[float] = None
) -> VariogramEstimate:
    """
    Classical estimator gamma(b) = sum (Z_i - Z_j)^2 / (2 N_b) over pairs in bin b.

    Bins are equal-width and right-closed on (0, max_lag]; coincident
    sites are ignored. Distances are computed in row chunks.

    Args:
        sites: Site set with data
        n_bins: Number of bins (default: 15)
        max_lag: Largest lag (default: half the maximum pairwise distance)

    Returns:
        VariogramEstimate

    Raises:
        ValueError: If n < 2, n_bins < 1 or max_lag <= 0
    """
    z = sites.require_data()
    coords = sites.coords
    n = sites.n
    if n < 2:
        raise ValueError(f"Semi-variogram needs at least 2 sites, got {n}")
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    if max_lag is None:
        max_lag = 0.5 * _max_distance(coords)
    if not max_lag > 0:
        raise ValueError(f"max_lag must be positive, got {max_lag}")

    edges = np.linspace(0.0, max_lag, n_bins + 1)
    sums = np.zeros(n_bins)
    counts = np.zeros(n_bins, dtype=int)

    for start in range(0, n, ROW_CHUNK):
        stop = min(start + ROW_CHUNK, n)
        d = cdist(coords[start:stop], coords[start:])
        rows = np.arange(start, stop)[:, None]
        cols = np.arange(start, n)[None, :]
        keep = (cols > rows) & (d > 0) & (d <= max_lag)
        if not np.any(keep):
            continue
        sq = (z[start:stop, None] - z[None, start:]) ** 2
        bins = np.clip(np.digitize(d[keep], edges, right=True) - 1, 0, n_bins - 1)
        sums += np.bincount(bins, weights=sq[keep], minlength=n_bins)
        counts += np.bincount(bins, minlength=n_bins)

    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(counts > 0, sums / (2.0 * counts), np.nan)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return VariogramEstimate(bin_centers=centers, semivariance=gamma, counts=counts)


def semivariogram_overlay(
    family: CorrelationFamily,
    theta: ParamVector,
    max_lag: float,
    points: int = 100
) -> pd.DataFrame:
    """Fitted model curve (h, gamma_model(h)) on (0, max_lag]."""
    h = np.linspace(max_lag / points, max_lag, points)
    return pd.DataFrame({"h": h, "gamma_model": semivariogram_model(CorrelationFamily.parse(family), h, theta)})
