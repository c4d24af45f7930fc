"""
Large-block composite likelihood.

Pairs of cluster blocks contribute the joint Gaussian log-density of
their combined data; only block pairs with centroids closer than a
threshold (or nearest-neighbour pairs) enter the sum.
"""
from typing import List, Tuple

import numpy as np

from core import SiteSet, ParamVector, BlockPartition, NoActivePairs, ConfigError
from data.sites import pairwise_distances
from dense import gaussian_loglik
from estimators.base import BaseEstimator
from models import CorrelationFamily, covariance_matrix
from partition import active_pairs, nearest_block_pairs

PAIRINGS = ("threshold", "nearest")


def _pair_indices(part: BlockPartition, i: int, j: int) -> np.ndarray:
    return np.concatenate([part.blocks[i], part.blocks[j]])


class BlockEstimator(BaseEstimator):
    """
    BCL objective sum_{i<j} w_ij * l_{b_i, b_j}.

    Args:
        sites: Site set with data
        family: Correlation family
        partition: Cluster blocks
        threshold: Centroid distance below which a block pair is used
        pairing: ``threshold`` (default) or ``nearest`` (each block with its
            nearest block, threshold ignored)
    """

    method = "bcl"

    def __init__(
        self,
        sites: SiteSet,
        family: CorrelationFamily,
        partition: BlockPartition,
        threshold: float = np.inf,
        pairing: str = "threshold"
    ):
        super().__init__(sites, family)
        if partition.n_sites != sites.n:
            raise ValueError(f"Partition built for {partition.n_sites} sites, got {sites.n}")
        if partition.m < 2:
            raise ValueError("Block likelihood needs at least 2 blocks")
        if pairing not in PAIRINGS:
            raise ConfigError(f"Unknown block pairing: {pairing}. Available: {list(PAIRINGS)}")
        sites.check_distinct()
        self.partition = partition
        self.threshold = float(threshold)
        self.pairing = pairing

        if pairing == "nearest":
            pairs = nearest_block_pairs(partition)
        else:
            pairs = active_pairs(partition.centroids, self.threshold)
        if len(pairs) == 0:
            raise NoActivePairs(f"No block pair has centroids closer than {self.threshold}")

        self._pairs: List[Tuple[np.ndarray, np.ndarray]] = []
        for i, j in pairs:
            idx = _pair_indices(partition, int(i), int(j))
            self._pairs.append((idx, pairwise_distances(sites.coords[idx])))

    @property
    def n_pairs(self) -> int:
        """Number of block pairs in the objective."""
        return len(self._pairs)

    def objective(self, theta: ParamVector) -> float:
        z = self.z
        total = 0.0
        for idx, dist in self._pairs:
            total += gaussian_loglik(covariance_matrix(self.family, dist, theta), z[idx])
        return total

    def describe(self) -> dict:
        return {
            **super().describe(),
            "blocks": self.partition.m,
            "threshold": self.threshold,
            "pairing": self.pairing,
            "pairs": self.n_pairs,
        }


def bcl_pair_loglik(
    partition: BlockPartition,
    i: int,
    j: int,
    sites: SiteSet,
    family: CorrelationFamily,
    theta: ParamVector
) -> float:
    """
    Joint log-density of Z over blocks b_i and b_j (constants omitted).

    Raises:
        ValueError: If i == j
        EvaluationInfeasible: If the joint covariance is not positive definite
    """
    if i == j:
        raise ValueError("Block pair requires two distinct blocks")
    idx = _pair_indices(partition, i, j)
    dist = pairwise_distances(sites.coords[idx])
    cov = covariance_matrix(CorrelationFamily.parse(family), dist, theta)
    return gaussian_loglik(cov, sites.require_data()[idx])


def bcl_objective(
    partition: BlockPartition,
    sites: SiteSet,
    family: CorrelationFamily,
    theta: ParamVector,
    center_threshold: float
) -> float:
    """BCL objective with centroid-threshold weights."""
    return BlockEstimator(sites, family, partition, center_threshold).objective(theta)
