"""
Bi-conditional composite likelihood.

Sites are grouped into two-site blocks Z_i = (Z_i^a, Z_i^b). For every
ordered pair of blocks (i, j) with nonzero weight, the objective adds the
log-density of Z_i given Z_j, a bivariate Gaussian whose mean and
covariance have closed forms in the six correlations between the four
sites. No matrix is factored.
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from core import SiteSet, ParamVector, PairConfiguration, EvaluationInfeasible, NoActivePairs
from estimators.base import BaseEstimator
from models import CorrelationFamily, correlation_kernel
from partition import active_block_pairs, WEIGHT_RULES

ETA_FLOOR = 1e-300

# rows of the stacked correlations seen from the other block of the pair
REVERSED_ROWS = [0, 2, 1, 3, 5, 4]

Scalar = Union[float, np.ndarray]


@dataclass
class BiTermIntermediates:
    """
    Auxiliary quantities of the conditional density of Z_i given Z_j.

    Attributes:
        psi11, psi12, psi21, psi22: Entries of Sigma_12 Sigma_22^{-1}
        mu1, mu2: Conditional means of Z_i^a and Z_i^b
        xi11, xi12, xi22: Conditional covariance entries
        eta: Conditional determinant xi11 * xi22 - xi12^2
    """
    psi11: Scalar
    psi12: Scalar
    psi21: Scalar
    psi22: Scalar
    mu1: Scalar
    mu2: Scalar
    xi11: Scalar
    xi12: Scalar
    xi22: Scalar
    eta: Scalar


@dataclass
class _PairGeometry:
    """
    Site indices and distances for a batch of block pairs (i, j).

    ``h`` stacks the six distances row-wise in the order aa, ab, ba, bb,
    ii, jj, so a single kernel call yields every correlation. Swapping
    rows 1/2 and 4/5 gives the geometry of the reversed pairs (j, i).
    """
    ai: np.ndarray
    bi: np.ndarray
    aj: np.ndarray
    bj: np.ndarray
    h: np.ndarray

    @classmethod
    def build(cls, coords: np.ndarray, ai, bi, aj, bj) -> "_PairGeometry":
        def dist(p, q):
            return np.hypot(*(coords[p] - coords[q]).T)

        ai, bi, aj, bj = (np.atleast_1d(np.asarray(x, dtype=int)) for x in (ai, bi, aj, bj))
        h = np.vstack([dist(ai, aj), dist(ai, bj), dist(bi, aj), dist(bi, bj), dist(ai, bi), dist(aj, bj)])
        return cls(ai=ai, bi=bi, aj=aj, bj=bj, h=h)

    def __len__(self) -> int:
        return len(self.ai)


def _conditional_terms(
    rho: np.ndarray,
    za_i: np.ndarray,
    zb_i: np.ndarray,
    za_j: np.ndarray,
    zb_j: np.ndarray,
    theta: ParamVector
) -> Tuple[np.ndarray, BiTermIntermediates]:
    """Log-density of block i given block j from the stacked correlations rho."""
    r_aa, r_ab, r_ba, r_bb, r_ii, r_jj = rho
    s2 = theta.sigma2
    t2 = theta.tau2
    v = s2 + t2

    denom = v * v - (s2 * r_jj) ** 2
    if np.any(denom <= ETA_FLOOR):
        raise EvaluationInfeasible("Degenerate conditioning block")
    scale = s2 / denom

    psi11 = scale * (v * r_aa - s2 * r_ab * r_jj)
    psi12 = scale * (v * r_ab - s2 * r_aa * r_jj)
    psi21 = scale * (v * r_ba - s2 * r_bb * r_jj)
    psi22 = scale * (v * r_bb - s2 * r_ba * r_jj)

    xi11 = t2 + s2 * (1.0 - psi11 * r_aa - psi12 * r_ab)
    xi12 = s2 * (r_ii - psi11 * r_ba - psi12 * r_bb)
    xi22 = t2 + s2 * (1.0 - psi21 * r_ba - psi22 * r_bb)
    eta = xi11 * xi22 - xi12 * xi12
    if np.any(eta <= ETA_FLOOR):
        raise EvaluationInfeasible("Conditional covariance is not positive definite")

    mu1 = psi11 * za_j + psi12 * zb_j
    mu2 = psi21 * za_j + psi22 * zb_j
    e1 = za_i - mu1
    e2 = zb_i - mu2

    values = -0.5 * (np.log(eta) + (xi22 * e1 * e1 + xi11 * e2 * e2 - 2.0 * xi12 * e1 * e2) / eta)
    parts = BiTermIntermediates(
        psi11=psi11, psi12=psi12, psi21=psi21, psi22=psi22,
        mu1=mu1, mu2=mu2, xi11=xi11, xi12=xi12, xi22=xi22, eta=eta,
    )
    return values, parts


def _bi_terms(
    geom: _PairGeometry,
    z: np.ndarray,
    family: CorrelationFamily,
    theta: ParamVector
) -> Tuple[np.ndarray, BiTermIntermediates]:
    """Vectorized conditional log-densities of block i given block j for every pair in geom."""
    rho = correlation_kernel(family, geom.h, theta.range)
    return _conditional_terms(rho, z[geom.ai], z[geom.bi], z[geom.aj], z[geom.bj], theta)


def _bi_terms_both_ways(
    geom: _PairGeometry,
    z: np.ndarray,
    family: CorrelationFamily,
    theta: ParamVector
) -> float:
    """Sum of the terms of i given j and of j given i over every pair in geom."""
    rho = correlation_kernel(family, geom.h, theta.range)
    za_i, zb_i, za_j, zb_j = z[geom.ai], z[geom.bi], z[geom.aj], z[geom.bj]
    forward, _ = _conditional_terms(rho, za_i, zb_i, za_j, zb_j, theta)
    backward, _ = _conditional_terms(rho[REVERSED_ROWS], za_j, zb_j, za_i, zb_i, theta)
    return float(np.sum(forward) + np.sum(backward))


def bi_term(
    cfg: PairConfiguration,
    i: int,
    j: int,
    sites: SiteSet,
    family: CorrelationFamily,
    theta: ParamVector
) -> Tuple[float, BiTermIntermediates]:
    """
    Conditional log-density of block i given block j (constants omitted).

    Args:
        cfg: Pair configuration
        i: Conditioned block
        j: Conditioning block
        sites: Site set with data
        family: Correlation family
        theta: Parameters

    Returns:
        Tuple of (term value, intermediates as scalars)

    Raises:
        ValueError: If i == j
        EvaluationInfeasible: If the conditioning or conditional covariance degenerates
    """
    if i == j:
        raise ValueError("Conditioning requires two distinct blocks")
    geom = _PairGeometry.build(sites.coords, cfg.a[i], cfg.b[i], cfg.a[j], cfg.b[j])
    values, parts = _bi_terms(geom, sites.require_data(), CorrelationFamily.parse(family), theta)
    scalars = BiTermIntermediates(**{k: float(np.asarray(v)[0]) for k, v in vars(parts).items()})
    return float(values[0]), scalars


class BiConditionalEstimator(BaseEstimator):
    """
    Bi-CL objective summed over an ensemble of pair configurations.

    For each configuration, every ordered block pair (i, j), i != j, whose
    weight is 1 contributes the conditional term of block i given block j.
    Contributions of all configurations are added.
    """

    method = "bicl"

    def __init__(
        self,
        sites: SiteSet,
        family: CorrelationFamily,
        ensemble: Sequence[PairConfiguration],
        ds: float,
        weight_rule: str = "first"
    ):
        super().__init__(sites, family)
        if len(ensemble) == 0:
            raise ValueError("Configuration ensemble is empty")
        if weight_rule not in WEIGHT_RULES:
            raise ValueError(f"Unknown weight rule: {weight_rule}. Available: {list(WEIGHT_RULES)}")
        self.ensemble: List[PairConfiguration] = list(ensemble)
        self.ds = float(ds)
        self.weight_rule = weight_rule

        chunks = []
        for cfg in self.ensemble:
            if cfg.n_sites != sites.n:
                raise ValueError(f"Configuration built for {cfg.n_sites} sites, got {sites.n}")
            pairs = active_block_pairs(cfg, sites, self.ds, weight_rule)
            if len(pairs) == 0:
                continue
            # one entry per unordered pair; objective() adds both conditioning directions
            chunks.append((cfg.a[pairs[:, 0]], cfg.b[pairs[:, 0]], cfg.a[pairs[:, 1]], cfg.b[pairs[:, 1]]))

        if not chunks:
            raise NoActivePairs(f"No block pair has weight 1 at d_s={self.ds}")
        ai, bi, aj, bj = (np.concatenate(parts) for parts in zip(*chunks))
        self._geom = _PairGeometry.build(sites.coords, ai, bi, aj, bj)

    @property
    def n_terms(self) -> int:
        """Number of ordered block pairs across the ensemble."""
        return 2 * len(self._geom)

    def objective(self, theta: ParamVector) -> float:
        return _bi_terms_both_ways(self._geom, self.z, self.family, theta)

    def describe(self) -> dict:
        return {
            **super().describe(),
            "ds": self.ds,
            "configurations": len(self.ensemble),
            "weight_rule": self.weight_rule,
            "terms": self.n_terms,
        }


def bi_cl_objective(
    ensemble: Sequence[PairConfiguration],
    sites: SiteSet,
    family: CorrelationFamily,
    theta: ParamVector,
    ds: float
) -> float:
    """Bi-CL objective of the data in sites for a configuration ensemble."""
    return BiConditionalEstimator(sites, family, ensemble, ds).objective(theta)
