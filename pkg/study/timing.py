"""
Timing bench: bi-CL objective evaluation against the Cholesky work of BCL.
"""
import logging
import time
from typing import Callable, Iterable, Optional

import numpy as np
import pandas as pd

from core import ParamVector
from data.sites import generate_uniform_sites, pairwise_distances
from dense import cholesky
from estimators.bicl import BiConditionalEstimator
from models import CorrelationFamily, covariance_matrix
from partition import build_pair_configuration

logger = logging.getLogger(__name__)

BENCH_THETA = ParamVector(tau2=0.1, sigma2=1.0, range=0.1)

# (label, number of factorizations, order divisor)
BCL_BOUNDS = (("bcl8", 8, 4), ("bcl16", 16, 8))


def cholesky_bound_seconds(
    coords: np.ndarray,
    family: CorrelationFamily,
    theta: ParamVector,
    count: int,
    order: int
) -> float:
    """
    Wall time of ``count`` factorizations of order ``order``.

    Each matrix is the model covariance of a consecutive slice of the sites,
    so the factored matrices are those a block likelihood would meet.
    Matrix assembly is not timed.
    """
    n = len(coords)
    total = 0.0
    for k in range(count):
        start = (k * order) % max(n - order + 1, 1)
        cov = covariance_matrix(family, pairwise_distances(coords[start:start + order]), theta)
        t0 = time.perf_counter()
        cholesky(cov)
        total += time.perf_counter() - t0
    return total


def bench_timing(
    n_values: Iterable[int],
    rng: np.random.Generator,
    ds: float = 0.1,
    family: CorrelationFamily = CorrelationFamily.EXPONENTIAL,
    theta: ParamVector = BENCH_THETA,
    extent: float = 1.0,
    include_bounds: bool = True,
    eval_repeats: int = 3,
    progress: Optional[Callable[[dict], None]] = None
) -> pd.DataFrame:
    """
    Time one bi-CL evaluation and the BCL Cholesky lower bounds per n.

    Args:
        n_values: Site counts (at least 8)
        rng: Random generator for sites, pairings and data
        ds: bi-CL weighting threshold (default: 0.1)
        family: Correlation family
        theta: Parameters of the evaluation and the factored covariances
        extent: Side of the square domain
        include_bounds: Also time the 8 x (n/4) and 16 x (n/8) factorizations
        eval_repeats: Evaluations timed per n; the fastest is reported
        progress: Optional callback receiving each finished row

    Returns:
        DataFrame with columns n, bicl_setup_seconds, bicl_eval_seconds,
        bicl_seconds, bcl8_bound_seconds, bcl16_bound_seconds

    Raises:
        ValueError: If an n is below 8 or eval_repeats < 1
    """
    family = CorrelationFamily.parse(family)
    if eval_repeats < 1:
        raise ValueError(f"eval_repeats must be >= 1, got {eval_repeats}")
    rows = []
    for n in n_values:
        n = int(n)
        if n < 8:
            raise ValueError(f"Timing needs n >= 8, got {n}")

        sites = generate_uniform_sites(n, rng, extent)
        sites = sites.with_data(rng.standard_normal(n))

        t0 = time.perf_counter()
        estimator = BiConditionalEstimator(sites, family, [build_pair_configuration(sites, rng)], ds)
        setup = time.perf_counter() - t0

        evaluation = np.inf
        for _ in range(eval_repeats):
            t0 = time.perf_counter()
            estimator.objective(theta)
            evaluation = min(evaluation, time.perf_counter() - t0)

        row = {
            "n": n,
            "bicl_setup_seconds": setup,
            "bicl_eval_seconds": evaluation,
            "bicl_seconds": setup + evaluation,
        }
        for label, count, divisor in BCL_BOUNDS:
            row[f"{label}_bound_seconds"] = (
                cholesky_bound_seconds(sites.coords, family, theta, count, n // divisor)
                if include_bounds else np.nan
            )
        logger.info("Timing n=%d: %s", n, row)
        if progress is not None:
            progress(row)
        rows.append(row)

    return pd.DataFrame(rows, columns=[
        "n", "bicl_setup_seconds", "bicl_eval_seconds", "bicl_seconds",
        "bcl8_bound_seconds", "bcl16_bound_seconds",
    ])
