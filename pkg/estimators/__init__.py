"""
Estimator registry for easy access to all likelihood objectives.
"""
import math
from typing import Optional, Sequence

import numpy as np

from core import SiteSet, PairConfiguration, BlockPartition, ConfigError
from estimators.base import BaseEstimator
from estimators.ml import MLEstimator
from estimators.pcl import PairwiseEstimator
from estimators.bicl import BiConditionalEstimator
from estimators.bcl import BlockEstimator
from config.manager import MethodSpec
from models import CorrelationFamily
from partition import build_configuration_ensemble, build_cluster_blocks


ESTIMATOR_MAP = {
    "ml": MLEstimator,
    "pcl": PairwiseEstimator,
    "bicl": BiConditionalEstimator,
    "bcl": BlockEstimator,
}


def _require_rng(rng: Optional[np.random.Generator], method: str) -> np.random.Generator:
    if rng is None:
        raise ValueError(f"{method} needs a random generator to build its partition")
    return rng


def get_estimator(
    method: str,
    sites: SiteSet,
    family: CorrelationFamily,
    rng: Optional[np.random.Generator] = None,
    ds: Optional[float] = None,
    configurations: int = 1,
    weight_rule: str = "first",
    blocks: Optional[int] = None,
    block_threshold: float = math.inf,
    block_pairing: str = "threshold",
    ensemble: Optional[Sequence[PairConfiguration]] = None,
    partition: Optional[BlockPartition] = None
) -> BaseEstimator:
    """
    Get an estimator instance by method token.

    Partitions are built from ``rng`` unless supplied through
    ``ensemble`` (bicl) or ``partition`` (bcl).

    Args:
        method: Method token ('ml', 'pcl', 'bicl', 'bcl')
        sites: Site set with data
        family: Correlation family
        rng: Random generator for pair configurations or k-means seeding
        ds: Weighting threshold for pcl and bicl
        configurations: Number of pair configurations for bicl
        weight_rule: Block distance rule for bicl
        blocks: Number of cluster blocks for bcl
        block_threshold: Centroid threshold for bcl
        block_pairing: 'threshold' or 'nearest' for bcl
        ensemble: Prebuilt pair configurations
        partition: Prebuilt cluster blocks

    Returns:
        Estimator instance

    Raises:
        ConfigError: For unknown methods or missing settings
    """
    name = method.lower()
    if name not in ESTIMATOR_MAP:
        raise ConfigError(f"Unknown method: {method}. Available: {list(ESTIMATOR_MAP.keys())}")

    if name == "ml":
        return MLEstimator(sites, family)

    if name in ("pcl", "bicl") and ds is None:
        raise ConfigError(f"{name} needs a weighting threshold ds")

    if name == "pcl":
        return PairwiseEstimator(sites, family, ds)

    if name == "bicl":
        if ensemble is None:
            ensemble = build_configuration_ensemble(sites, configurations, _require_rng(rng, name))
        return BiConditionalEstimator(sites, family, ensemble, ds, weight_rule)

    if partition is None:
        if blocks is None:
            raise ConfigError("bcl needs a block count")
        partition = build_cluster_blocks(sites, blocks, _require_rng(rng, name))
    return BlockEstimator(sites, family, partition, block_threshold, block_pairing)


def build_estimator(
    spec: MethodSpec,
    sites: SiteSet,
    family: CorrelationFamily,
    rng: Optional[np.random.Generator] = None
) -> BaseEstimator:
    """
    Build the estimator a study method entry describes.

    Args:
        spec: Method entry
        sites: Site set with data
        family: Correlation family
        rng: Random generator for partitions

    Returns:
        Estimator instance
    """
    return get_estimator(
        spec.method,
        sites,
        family,
        rng=rng,
        ds=spec.ds,
        configurations=spec.configurations,
        weight_rule=spec.weight_rule,
        blocks=spec.blocks,
        block_threshold=spec.threshold,
        block_pairing=spec.block_pairing,
    )


def list_estimators() -> list:
    """List all available method tokens."""
    return list(ESTIMATOR_MAP.keys())
