"""
Partitioning of sites into two-site configurations and cluster blocks.

Two-site configurations feed the bi-conditional likelihood; cluster
blocks feed the large-block likelihood. Weights are 0/1 distance
thresholds.
"""
import json
import logging
import warnings
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from core import SiteSet, PairConfiguration, BlockPartition, DataError

logger = logging.getLogger(__name__)

WEIGHT_RULES = ("first", "min", "max", "mean")
KMEANS_MAX_ITER = 100


def build_pair_configuration(sites: SiteSet, rng: np.random.Generator) -> PairConfiguration:
    """
    Pair sites around uniformly simulated seed points.

    n/2 seed points are drawn uniformly over the bounding box of the sites.
    In the simulated order, each seed point takes its two nearest
    unassigned sites; the nearer one is labeled ``a``. Ties go to the lowest
    site index. With odd n the highest-index site is excluded first.

    Args:
        sites: Site set with n >= 2
        rng: Random generator

    Returns:
        PairConfiguration

    Raises:
        ValueError: If n < 2
    """
    n = sites.n
    if n < 2:
        raise ValueError(f"Need at least 2 sites to pair, got {n}")
    usable = n - (n % 2)
    excluded = tuple(range(usable, n))
    coords = sites.coords[:usable]
    n_blocks = usable // 2

    low = coords.min(axis=0)
    high = coords.max(axis=0)
    seeds = rng.uniform(low, high, size=(n_blocks, 2))

    free = np.ones(usable, dtype=bool)
    blocks = np.empty((n_blocks, 2), dtype=int)
    for k, seed in enumerate(seeds):
        d = np.hypot(coords[:, 0] - seed[0], coords[:, 1] - seed[1])
        d[~free] = np.inf
        first = int(np.argmin(d))
        d[first] = np.inf
        second = int(np.argmin(d))
        free[first] = free[second] = False
        blocks[k] = (first, second)

    return PairConfiguration(blocks=blocks, n_sites=n, excluded=excluded)


def build_configuration_ensemble(
    sites: SiteSet,
    count: int,
    rng: np.random.Generator
) -> List[PairConfiguration]:
    """
    Independent configurations drawn from one stream.

    Raises:
        ValueError: If count < 1
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [build_pair_configuration(sites, rng) for _ in range(count)]


def _repair_empty_clusters(labels: np.ndarray, coords: np.ndarray, m: int) -> np.ndarray:
    labels = labels.copy()
    while True:
        counts = np.bincount(labels, minlength=m)
        empty = np.flatnonzero(counts == 0)
        if len(empty) == 0:
            return labels
        largest = int(np.argmax(counts))
        members = np.flatnonzero(labels == largest)
        center = coords[members].mean(axis=0)
        far = members[np.argmax(np.hypot(*(coords[members] - center).T))]
        labels[far] = empty[0]


def build_cluster_blocks(sites: SiteSet, m: int, rng: np.random.Generator) -> BlockPartition:
    """
    Spatially compact blocks from Lloyd k-means on the coordinates.

    Initial centers are m distinct sites sampled from rng; at most 100
    iterations. Empty clusters are repaired by moving the farthest member
    of the largest cluster.

    Raises:
        ValueError: If m < 1 or m > n
    """
    n = sites.n
    if m < 1 or m > n:
        raise ValueError(f"Block count must lie in [1, {n}], got {m}")
    coords = sites.coords

    if m == 1:
        labels = np.zeros(n, dtype=int)
    else:
        init = coords[rng.choice(n, size=m, replace=False)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            km = KMeans(n_clusters=m, init=init, n_init=1, max_iter=KMEANS_MAX_ITER, algorithm="lloyd")
            labels = km.fit_predict(coords)
        labels = _repair_empty_clusters(np.asarray(labels, dtype=int), coords, m)

    blocks = [np.flatnonzero(labels == k) for k in range(m)]
    centroids = np.array([coords[b].mean(axis=0) for b in blocks])
    return BlockPartition(blocks=blocks, centroids=centroids, n_sites=n)


def _rule_distance(coords: np.ndarray, cfg: PairConfiguration, i, j, rule: str):
    """Block-to-block distance under a weight rule; i and j may be arrays."""
    ai, bi = coords[cfg.a[i]], coords[cfg.b[i]]
    aj, bj = coords[cfg.a[j]], coords[cfg.b[j]]
    d_aa = np.hypot(*(ai - aj).T)
    if rule == "first":
        return d_aa
    cross = np.stack([
        d_aa,
        np.hypot(*(ai - bj).T),
        np.hypot(*(bi - aj).T),
        np.hypot(*(bi - bj).T),
    ])
    if rule == "min":
        return cross.min(axis=0)
    if rule == "max":
        return cross.max(axis=0)
    if rule == "mean":
        return cross.mean(axis=0)
    raise ValueError(f"Unknown weight rule: {rule}. Available: {list(WEIGHT_RULES)}")


def pair_weight(
    cfg: PairConfiguration,
    i: int,
    j: int,
    sites: SiteSet,
    d_s: float,
    rule: str = "first"
) -> int:
    """
    0/1 weight between two-site blocks i and j.

    With the default rule the a-sites are compared: 1 if
    ||s_i^a - s_j^a|| < d_s else 0. Rules ``min``, ``max`` and ``mean``
    use the corresponding statistic of the four element-wise distances.

    Raises:
        ValueError: If i == j or d_s <= 0
        IndexError: If a block index is out of range
    """
    if i == j:
        raise ValueError("Weights are defined between distinct blocks")
    if d_s <= 0:
        raise ValueError(f"d_s must be positive, got {d_s}")
    for k in (i, j):
        if not 0 <= k < cfg.size:
            raise IndexError(f"Block index {k} out of range for {cfg.size} blocks")
    d = float(_rule_distance(sites.coords, cfg, np.array([i]), np.array([j]), rule)[0])
    return int(d < d_s)


def block_weight(part: BlockPartition, i: int, j: int, threshold: float) -> int:
    """
    0/1 weight between cluster blocks: 1 if centroids are closer than threshold.

    Raises:
        ValueError: If i == j or threshold <= 0
        IndexError: If a block index is out of range
    """
    if i == j:
        raise ValueError("Weights are defined between distinct blocks")
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    for k in (i, j):
        if not 0 <= k < part.m:
            raise IndexError(f"Block index {k} out of range for {part.m} blocks")
    ci, cj = part.centroids[i], part.centroids[j]
    return int(np.hypot(ci[0] - cj[0], ci[1] - cj[1]) < threshold)


def active_pairs(points: np.ndarray, threshold: float) -> np.ndarray:
    """
    Unordered index pairs (i < j) with ||p_i - p_j|| < threshold.

    Returns:
        (k, 2) integer array sorted lexicographically
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(points) < 2 or not threshold > 0:
        return np.empty((0, 2), dtype=int)
    if not np.isfinite(threshold):
        iu, ju = np.triu_indices(len(points), k=1)
        return np.column_stack([iu, ju])
    tree = cKDTree(points)
    pairs = tree.query_pairs(r=threshold, output_type="ndarray")
    if len(pairs) == 0:
        return np.empty((0, 2), dtype=int)
    pairs = np.sort(pairs, axis=1)
    d = np.hypot(*(points[pairs[:, 0]] - points[pairs[:, 1]]).T)
    pairs = pairs[d < threshold]
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order].astype(int)


def active_block_pairs(
    cfg: PairConfiguration,
    sites: SiteSet,
    d_s: float,
    rule: str = "first"
) -> np.ndarray:
    """
    Unordered block pairs of a configuration with pair_weight == 1.

    Candidates come from a KD-tree on the a-sites; for rules other than
    ``first`` the search radius is widened by twice the largest within-block
    separation, which bounds every element-wise distance from below.
    """
    if rule not in WEIGHT_RULES:
        raise ValueError(f"Unknown weight rule: {rule}. Available: {list(WEIGHT_RULES)}")
    a_pts = sites.coords[cfg.a]
    if rule == "first":
        return active_pairs(a_pts, d_s)
    if not d_s > 0:
        return np.empty((0, 2), dtype=int)
    widths = np.hypot(*(sites.coords[cfg.a] - sites.coords[cfg.b]).T)
    radius = d_s + 2.0 * float(widths.max()) + 1e-12
    candidates = active_pairs(a_pts, radius)
    if len(candidates) == 0:
        return candidates
    d = _rule_distance(sites.coords, cfg, candidates[:, 0], candidates[:, 1], rule)
    return candidates[d < d_s]


def nearest_block_pairs(part: BlockPartition) -> np.ndarray:
    """
    Pair every block with its nearest block by centroid distance.

    Returns:
        (k, 2) unordered, deduplicated pairs
    """
    if part.m < 2:
        return np.empty((0, 2), dtype=int)
    tree = cKDTree(part.centroids)
    _, idx = tree.query(part.centroids, k=2)
    pairs = np.sort(np.column_stack([np.arange(part.m), idx[:, 1]]), axis=1)
    return np.unique(pairs, axis=0).astype(int)


def save_partition(obj: Union[PairConfiguration, BlockPartition, Sequence[PairConfiguration]], path: Union[str, Path]) -> None:
    """Write a configuration, ensemble, or block partition as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(obj, (PairConfiguration, BlockPartition)):
        payload = obj.to_dict()
    else:
        payload = {"configurations": [cfg.to_dict() for cfg in obj]}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)


def load_partition(path: Union[str, Path]) -> Union[BlockPartition, List[PairConfiguration]]:
    """
    Read a JSON partition written by save_partition.

    Returns:
        BlockPartition, or a list of PairConfiguration for configuration files

    Raises:
        FileNotFoundError: If the file doesn't exist
        DataError: If the file is not a valid partition
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Partition file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        if "configurations" in payload:
            return [PairConfiguration.from_dict(d) for d in payload["configurations"]]
        if "centroids" in payload:
            return BlockPartition.from_dict(payload)
        return [PairConfiguration.from_dict(payload)]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DataError(f"Invalid partition file {path}: {e}") from e
