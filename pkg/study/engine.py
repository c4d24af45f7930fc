"""
Monte Carlo engine for comparing estimators against the full likelihood.
"""
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from core import SiteSet, ParamVector, EstimateResult, GeolikError, SingularMoment
from config.manager import StudyConfig, MethodSpec
from data.sites import pairwise_distances, generate_perturbed_grid, generate_uniform_sites
from dense import cholesky, sample_gaussian
from estimators import build_estimator
from estimators.base import BaseEstimator
from models import CorrelationFamily, covariance_matrix
from optim import OptimOptions

logger = logging.getLogger(__name__)

# Row order of efficiency tables
TABLE_ROWS = ("sigma2", "range", "tau2")


def simulate_field(
    sites: SiteSet,
    family: CorrelationFamily,
    theta: ParamVector,
    rng: np.random.Generator
) -> SiteSet:
    """
    Draw Z ~ N(0, sigma2 R + tau2 I) on the given sites.

    Returns:
        The sites carrying the simulated data vector
    """
    cov = covariance_matrix(CorrelationFamily.parse(family), pairwise_distances(sites.coords), theta)
    return sites.with_data(sample_gaussian(cholesky(cov), rng))


def _rmse(estimates: np.ndarray, theta_true: np.ndarray) -> np.ndarray:
    return np.sqrt(np.mean((estimates - theta_true) ** 2, axis=0))


def relative_rrmse(
    method_estimates: np.ndarray,
    ml_estimates: np.ndarray,
    theta_true: Union[ParamVector, np.ndarray]
) -> np.ndarray:
    """
    Per-parameter ratio RMSE_ML / RMSE_method.

    Values below 1 mean the method is less accurate than the full
    likelihood. A method with zero RMSE gets an infinite ratio, unless ML
    is exact as well (ratio 1).

    Args:
        method_estimates: (R, p) replicate estimates of the method
        ml_estimates: (R, p) replicate estimates of ML
        theta_true: True parameters, ordered like the columns

    Returns:
        Length-p array of ratios

    Raises:
        ValueError: If the replicate matrices differ in shape
    """
    est = np.atleast_2d(np.asarray(method_estimates, dtype=float))
    ml = np.atleast_2d(np.asarray(ml_estimates, dtype=float))
    if est.shape != ml.shape:
        raise ValueError(f"Replicate shapes differ: {est.shape} vs {ml.shape}")
    truth = theta_true.to_array() if isinstance(theta_true, ParamVector) else np.asarray(theta_true, dtype=float)

    rmse_method = _rmse(est, truth)
    rmse_ml = _rmse(ml, truth)
    ratios = np.empty_like(rmse_method)
    for k, (a, b) in enumerate(zip(rmse_ml, rmse_method)):
        if b > 0:
            ratios[k] = a / b
        elif a > 0:
            logger.warning("Method is exact on parameter %d; relative RMSE is infinite", k)
            ratios[k] = np.inf
        else:
            ratios[k] = 1.0
    return ratios


def moment_matrix(estimates: np.ndarray, theta_true: Union[ParamVector, np.ndarray]) -> np.ndarray:
    """G = R^{-1} sum_r (theta_r - theta)(theta_r - theta)'."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    truth = theta_true.to_array() if isinstance(theta_true, ParamVector) else np.asarray(theta_true, dtype=float)
    dev = est - truth
    return dev.T @ dev / len(dev)


def global_efficiency(
    method_estimates: np.ndarray,
    ml_estimates: np.ndarray,
    theta_true: Union[ParamVector, np.ndarray]
) -> float:
    """
    Determinant efficiency (|G_ML|^{1/2} / |G_method|^{1/2})^{1/p}.

    Args:
        method_estimates: (R, p) replicate estimates of the method
        ml_estimates: (R, p) replicate estimates of ML
        theta_true: True parameters

    Returns:
        Scalar efficiency

    Raises:
        SingularMoment: If either moment matrix is rank deficient or has a
            nonpositive determinant
    """
    g_method = moment_matrix(method_estimates, theta_true)
    g_ml = moment_matrix(ml_estimates, theta_true)
    p = g_ml.shape[0]

    # R deviations span at most R dimensions; slogdet alone reports round-off as a determinant
    for label, g in (("ML", g_ml), ("method", g_method)):
        rank = np.linalg.matrix_rank(g)
        if rank < p:
            raise SingularMoment(
                f"{label} moment matrix has rank {rank} < {p}; more replicates are needed"
            )

    sign_ml, logdet_ml = np.linalg.slogdet(g_ml)
    sign_method, logdet_method = np.linalg.slogdet(g_method)
    if sign_ml <= 0 or sign_method <= 0:
        raise SingularMoment("Empirical moment matrix is singular; more replicates are needed")
    return float(np.exp(0.5 * (logdet_ml - logdet_method) / p))


@dataclass
class StudyResult:
    """
    Results from a Monte Carlo study.

    Attributes:
        config: Study configuration
        estimates: Method label -> (R, 3) estimates ordered (tau2, sigma2, range)
        iterations: Method label -> (R,) optimizer iterations
        converged: Method label -> (R,) convergence flags
        replicate_ids: Indices of the replicates kept
        failures: Replicate index -> failure message, for dropped replicates
    """
    config: StudyConfig
    estimates: Dict[str, np.ndarray]
    iterations: Dict[str, np.ndarray]
    converged: Dict[str, np.ndarray]
    replicate_ids: np.ndarray
    failures: Dict[int, str] = field(default_factory=dict)

    @property
    def benchmark(self) -> str:
        return self.config.benchmark

    @property
    def labels(self) -> List[str]:
        return [m.label for m in self.config.methods]

    @property
    def compared(self) -> List[str]:
        """Labels other than the benchmark."""
        return [label for label in self.labels if label != self.benchmark]

    def relative_rrmse(self, label: str) -> np.ndarray:
        return relative_rrmse(self.estimates[label], self.estimates[self.benchmark], self.config.theta_true)

    def global_efficiency(self, label: str) -> float:
        return global_efficiency(self.estimates[label], self.estimates[self.benchmark], self.config.theta_true)

    def efficiency_table(self) -> pd.DataFrame:
        """
        Relative RMSE rows (sigma2, range, tau2) and a global row, one column per method.

        Returns:
            DataFrame indexed by parameter name
        """
        columns = {}
        for label in self.compared:
            ratios = dict(zip(ParamVector.NAMES, self.relative_rrmse(label)))
            try:
                overall = self.global_efficiency(label)
            except SingularMoment as e:
                logger.warning("%s: %s", label, e)
                overall = np.nan
            columns[label] = [ratios[name] for name in TABLE_ROWS] + [overall]
        return pd.DataFrame(columns, index=list(TABLE_ROWS) + ["global"])

    def replicates_frame(self) -> pd.DataFrame:
        """Long table of replicate estimates, R rows per method."""
        frames = []
        for label in self.labels:
            est = self.estimates[label]
            frames.append(pd.DataFrame({
                "replicate": self.replicate_ids,
                "method": label,
                "tau2": est[:, 0],
                "sigma2": est[:, 1],
                "range": est[:, 2],
                "iterations": self.iterations[label],
                "converged": self.converged[label],
            }))
        return pd.concat(frames, ignore_index=True)

    def to_dict(self) -> Dict:
        table = self.efficiency_table()
        return {
            "name": self.config.name,
            "family": self.config.family,
            "theta_true": self.config.theta_true.to_dict(),
            "n": self.config.n,
            "replicates_requested": self.config.replicates,
            "replicates_kept": int(len(self.replicate_ids)),
            "failures": {str(k): v for k, v in self.failures.items()},
            "benchmark": self.benchmark,
            "efficiency": {
                label: {row: _json_float(table.loc[row, label]) for row in table.index}
                for label in table.columns
            },
            "median_iterations": {label: float(np.median(self.iterations[label])) for label in self.labels},
        }

    def summary(self) -> str:
        """Generate human-readable summary."""
        table = self.efficiency_table()
        return f"""
{'='*60}
Study: {self.config.name} ({self.config.family})
{'='*60}
Replicates: {len(self.replicate_ids)} kept, {len(self.failures)} dropped
Relative efficiency against {self.benchmark}:
{table.to_string(float_format=lambda v: f'{v:.4f}')}
{'='*60}
"""

    def save(self, output_dir: Union[str, Path]) -> List[Path]:
        """
        Write efficiency.csv, replicates.csv and summary.json.

        Returns:
            Paths written
        """
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        paths = [output_dir / "efficiency.csv", output_dir / "replicates.csv", output_dir / "summary.json"]
        self.efficiency_table().to_csv(paths[0], index_label="parameter", float_format="%.10g")
        self.replicates_frame().to_csv(paths[1], index=False, float_format="%.17g")
        with open(paths[2], "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
        return paths


def _json_float(value: float) -> Optional[float]:
    value = float(value)
    return value if np.isfinite(value) else None


class StudyEngine:
    """
    Run a Monte Carlo study.

    Replicate r draws its data from ``default_rng([seed, 0, r])``. Sites come
    from ``default_rng([seed, 1])`` when fixed, else ``default_rng([seed, 1, r])``.
    Partitions of the k-th distinct method setting use ``default_rng([seed, 2, k])``
    (with r appended when sites are redrawn), so methods with equal settings
    share one estimator.
    """

    def __init__(self, config: StudyConfig, threads: Optional[int] = None):
        """
        Initialize engine.

        Args:
            config: Study configuration
            threads: Worker count for replicates (None = all cores)
        """
        self.config = config
        self.threads = threads
        self.family = CorrelationFamily.parse(config.family)
        self._slots = self._method_slots(config.methods)
        self._fixed: Optional[Tuple[SiteSet, object, List[BaseEstimator]]] = None

    @staticmethod
    def _method_slots(methods: List[MethodSpec]) -> List[int]:
        """Index of the first method sharing each method's settings."""
        first: Dict[Tuple, int] = {}
        return [first.setdefault(m.settings_key(), k) for k, m in enumerate(methods)]

    def _draw_sites(self, rng: np.random.Generator) -> SiteSet:
        cfg = self.config
        if cfg.site_scheme == "uniform":
            return generate_uniform_sites(cfg.n, rng, cfg.extent)
        return generate_perturbed_grid(cfg.n, rng, cfg.spacing, cfg.jitter, cfg.extent)

    def _design(self, replicate: Optional[int]):
        """Sites, covariance factor and estimators (keyed by slot) for one design."""
        cfg = self.config
        suffix = [] if replicate is None else [replicate]
        sites = self._draw_sites(np.random.default_rng([cfg.seed, 1] + suffix))
        cov = covariance_matrix(self.family, pairwise_distances(sites.coords), cfg.theta_true)
        factor = cholesky(cov)
        # Data is swapped in per replicate.
        template = sites.with_data(np.zeros(sites.n))
        estimators = {}
        for k, spec in enumerate(cfg.methods):
            slot = self._slots[k]
            if slot not in estimators:
                rng = np.random.default_rng([cfg.seed, 2, slot] + suffix)
                estimators[slot] = build_estimator(spec, template, self.family, rng)
        return sites, factor, estimators

    def _options(self, estimator: BaseEstimator) -> OptimOptions:
        cfg = self.config
        initial = cfg.theta_true if cfg.start == "truth" else estimator.default_start()
        return OptimOptions(initial=initial, max_iterations=cfg.max_iterations, tolerance=cfg.tolerance)

    def run_replicate(self, r: int) -> Tuple[int, Optional[Dict[int, EstimateResult]], str]:
        """
        Simulate replicate r and fit every distinct method.

        Returns:
            Tuple of (r, results by slot or None on failure, failure message)
        """
        try:
            if self.config.fixed_sites:
                if self._fixed is None:
                    self._fixed = self._design(None)
                sites, factor, estimators = self._fixed
            else:
                sites, factor, estimators = self._design(r)

            z = sample_gaussian(factor, np.random.default_rng([self.config.seed, 0, r]))
            results = {}
            for slot, estimator in estimators.items():
                bound = estimator.with_data(z)
                results[slot] = bound.fit(self._options(bound))
            return r, results, ""
        except GeolikError as e:
            return r, None, f"{type(e).__name__}: {e}"

    def run(self, verbose: bool = False) -> StudyResult:
        """
        Run all replicates.

        A replicate that fails for any method is dropped for every method.

        Args:
            verbose: Log every replicate at INFO

        Returns:
            StudyResult
        """
        cfg = self.config
        if cfg.fixed_sites and self._fixed is None:
            self._fixed = self._design(None)

        if self.threads == 1:
            outcomes = [self.run_replicate(r) for r in range(cfg.replicates)]
        else:
            outcomes = Parallel(n_jobs=self.threads or -1, prefer="threads")(
                delayed(self.run_replicate)(r) for r in range(cfg.replicates)
            )

        kept: List[int] = []
        rows: Dict[str, List[EstimateResult]] = {m.label: [] for m in cfg.methods}
        failures: Dict[int, str] = {}
        for r, results, message in sorted(outcomes, key=lambda o: o[0]):
            if results is None:
                failures[r] = message
                logger.warning("Replicate %d dropped: %s", r, message)
                continue
            kept.append(r)
            for k, spec in enumerate(cfg.methods):
                rows[spec.label].append(results[self._slots[k]])
            if verbose:
                logger.info("Replicate %d done", r)

        if not kept:
            raise GeolikError(f"All {cfg.replicates} replicates failed")

        return StudyResult(
            config=cfg,
            estimates={label: np.array([res.theta_hat.to_array() for res in rs]) for label, rs in rows.items()},
            iterations={label: np.array([res.iterations for res in rs]) for label, rs in rows.items()},
            converged={label: np.array([res.converged for res in rs]) for label, rs in rows.items()},
            replicate_ids=np.array(kept),
            failures=failures,
        )


def run_study(config: StudyConfig, threads: Optional[int] = None, verbose: bool = False) -> StudyResult:
    """Run a Monte Carlo study with a fresh engine."""
    return StudyEngine(config, threads).run(verbose=verbose)
