"""
Isotropic correlation and covariance models parameterized by practical range.

Each family maps a distance h >= 0 to a correlation in (0, 1] with
rho(0) = 1 and rho(h) < 0.05 for h > range.
"""
from enum import Enum
from typing import Union

import numpy as np

from core import ParamVector, ConfigError

ArrayLike = Union[float, np.ndarray]

# Practical-range constants
EXPONENTIAL_SCALE = 3.0
MATERN15_SCALE = 4.7619
CAUCHY_SCALE = 4.3588


class CorrelationFamily(Enum):
    """
    Supported correlation families.

    Attributes:
        EXPONENTIAL: Matern with smoothness 0.5
        MATERN15: Matern with smoothness 1.5
        CAUCHY: Cauchy, polynomial decay
    """
    EXPONENTIAL = "exponential"
    MATERN15 = "matern15"
    CAUCHY = "cauchy"

    @classmethod
    def parse(cls, token: Union[str, "CorrelationFamily"]) -> "CorrelationFamily":
        """
        Resolve a CLI/config token.

        Raises:
            ConfigError: If the token names no family
        """
        if isinstance(token, cls):
            return token
        try:
            return cls(str(token).strip().lower())
        except ValueError:
            available = [f.value for f in cls]
            raise ConfigError(f"Unknown correlation family: {token}. Available: {available}")


def correlation_kernel(family: CorrelationFamily, h: np.ndarray, range_: float) -> np.ndarray:
    """
    Correlations of a float distance array without argument checks.

    Callers guarantee h >= 0 and range_ > 0, as with cached distances and a
    validated ParamVector.
    """
    if family is CorrelationFamily.EXPONENTIAL:
        return np.exp(-EXPONENTIAL_SCALE * h / range_)
    if family is CorrelationFamily.MATERN15:
        t = MATERN15_SCALE * h / range_
        return np.exp(-t) * (1.0 + t)
    if family is CorrelationFamily.CAUCHY:
        t = CAUCHY_SCALE * h / range_
        return 1.0 / (1.0 + t * t)
    raise ValueError(f"Unsupported family: {family}")


def correlate(family: CorrelationFamily, h: ArrayLike, range_: float) -> ArrayLike:
    """
    Evaluate rho(h; range) for scalar or array distances.

    Args:
        family: Correlation family
        h: Distance(s), must be >= 0
        range_: Practical range, must be > 0

    Returns:
        Correlation(s) with the same shape as h

    Raises:
        ValueError: If range_ <= 0 or any h < 0
    """
    if not range_ > 0:
        raise ValueError(f"range must be positive, got {range_}")
    arr = np.asarray(h, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("Distances must be nonnegative")
    rho = correlation_kernel(family, arr, range_)
    return float(rho) if rho.ndim == 0 else rho


def covariance(family: CorrelationFamily, h: ArrayLike, theta: ParamVector) -> ArrayLike:
    """
    Covariance sigma2 * rho(h) + tau2 * 1{h = 0}.

    The nugget makes the function discontinuous at the origin whenever tau2 > 0.
    """
    arr = np.asarray(h, dtype=float)
    rho = np.asarray(correlate(family, arr, theta.range))
    cov = theta.sigma2 * rho + theta.tau2 * (arr == 0.0)
    return float(cov) if cov.ndim == 0 else cov


def covariance_matrix(
    family: CorrelationFamily,
    distances: np.ndarray,
    theta: ParamVector
) -> np.ndarray:
    """
    Build sigma2 * R(range) + tau2 * I from a square distance matrix.

    The nugget is placed on the diagonal only.
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"Distance matrix must be square, got shape {d.shape}")
    cov = theta.sigma2 * correlation_kernel(family, d, theta.range)
    cov[np.diag_indices_from(cov)] += theta.tau2
    return cov


def semivariogram_model(family: CorrelationFamily, h: ArrayLike, theta: ParamVector) -> ArrayLike:
    """
    Model semi-variogram tau2 + sigma2 * (1 - rho(h)) for h > 0, zero at h = 0.
    """
    arr = np.asarray(h, dtype=float)
    rho = np.asarray(correlate(family, arr, theta.range))
    gamma = np.where(arr > 0, theta.tau2 + theta.sigma2 * (1.0 - rho), 0.0)
    return float(gamma) if gamma.ndim == 0 else gamma
