"""
Small dense symmetric-positive-definite linear algebra.

Cholesky factorization, solves, log-determinants, Gaussian sampling and
constant-free Gaussian log-densities. Every factorization of order > 0
increments a module counter so callers can prove that an objective is
matrix-free.
"""
from dataclasses import dataclass
from typing import Optional
import threading

import numpy as np
from scipy.linalg import cho_solve

from core import NotPositiveDefinite

PIVOT_TOLERANCE = 1e-12

_counter_lock = threading.Lock()
_factorizations = 0


def factorization_count() -> int:
    """Number of factorizations of order > 0 since the last reset."""
    return _factorizations


def reset_factorization_count() -> None:
    global _factorizations
    with _counter_lock:
        _factorizations = 0


def _record_factorization() -> None:
    global _factorizations
    with _counter_lock:
        _factorizations += 1


@dataclass(frozen=True)
class CholFactor:
    """
    Lower-triangular Cholesky factor L with L @ L.T equal to the source matrix.

    Attributes:
        lower: (n, n) lower-triangular array with positive diagonal
    """
    lower: np.ndarray

    @property
    def order(self) -> int:
        return self.lower.shape[0]


def cholesky(a: np.ndarray) -> CholFactor:
    """
    Factor a symmetric matrix.

    Args:
        a: Symmetric (n, n) matrix

    Returns:
        CholFactor

    Raises:
        ValueError: If a is not square, finite and symmetric
        NotPositiveDefinite: If a pivot falls at or below
            PIVOT_TOLERANCE * max diagonal entry
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"Matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("Matrix entries must be finite")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12 * max(scale, 1.0)):
        raise ValueError("Matrix must be symmetric")

    n = a.shape[0]
    if n == 0:
        return CholFactor(np.zeros((0, 0)))
    _record_factorization()

    max_diag = float(np.max(np.diag(a)))
    if max_diag <= 0:
        raise NotPositiveDefinite("Matrix has no positive diagonal entry")
    tol = PIVOT_TOLERANCE * max_diag
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {e}") from e
    pivots = np.diag(lower) ** 2
    if np.any(~np.isfinite(pivots)) or np.any(pivots <= tol):
        raise NotPositiveDefinite(f"Pivot {float(np.min(pivots)):.3e} below tolerance {tol:.3e}")
    return CholFactor(lower)


def solve_spd(factor: CholFactor, rhs: np.ndarray) -> np.ndarray:
    """
    Solve A x = rhs given the Cholesky factor of A.

    Raises:
        ValueError: On dimension mismatch
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != factor.order:
        raise ValueError(f"Right-hand side has {rhs.shape[0]} rows, factor has order {factor.order}")
    if factor.order == 0:
        return rhs.copy()
    return cho_solve((factor.lower, True), rhs)


def log_det(factor: CholFactor) -> float:
    """log|A| = 2 * sum(log L_kk)."""
    return float(2.0 * np.sum(np.log(np.diag(factor.lower))))


def sample_gaussian(
    factor: CholFactor,
    rng: np.random.Generator,
    size: Optional[int] = None
) -> np.ndarray:
    """
    Draw zero-mean Gaussian vectors with covariance L @ L.T.

    Args:
        factor: Cholesky factor of the covariance
        rng: Random generator
        size: Optional number of draws

    Returns:
        (n,) vector, or (size, n) array when size is given
    """
    n = factor.order
    if size is None:
        eps = rng.standard_normal(n)
        return factor.lower @ eps
    eps = rng.standard_normal((size, n))
    return eps @ factor.lower.T


def gaussian_loglik(cov: np.ndarray, z: np.ndarray) -> float:
    """
    Zero-mean Gaussian log-density without the 2*pi constant.

    Returns:
        -0.5 * (log|cov| + z' cov^{-1} z)
    """
    factor = cholesky(cov)
    z = np.asarray(z, dtype=float)
    alpha = solve_spd(factor, z)
    return -0.5 * (log_det(factor) + float(z @ alpha))
