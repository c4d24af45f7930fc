"""
Core data models and types for the geolik estimation system.

This module defines the fundamental data structures used throughout
the package: parameter vectors, site sets, two-site configurations,
cluster block partitions, estimation results, run manifests, and the
exception hierarchy shared by the library and the CLI.
"""
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Dict, Any, List, Sequence, Tuple
import json

import numpy as np


class GeolikError(Exception):
    """
    Base class for all geolik errors.

    Attributes:
        exit_code: Process exit code used by the CLI when this error escapes
    """
    exit_code = 1


class ConfigError(GeolikError, ValueError):
    """Invalid configuration, flag value, or unknown token."""
    exit_code = 2


class DataError(GeolikError, ValueError):
    """Malformed or unusable input data."""
    exit_code = 3


class EvaluationInfeasible(GeolikError, ArithmeticError):
    """An objective cannot be evaluated at the requested parameters."""
    exit_code = 4


class NotPositiveDefinite(EvaluationInfeasible):
    """A covariance matrix failed Cholesky factorization."""


class InfeasibleStart(GeolikError):
    """The optimizer's starting point is infeasible."""
    exit_code = 4


class SingularMoment(GeolikError):
    """An empirical moment matrix is numerically singular."""
    exit_code = 4


class BootstrapFailure(GeolikError):
    """Too many bootstrap refits failed."""
    exit_code = 4


class NoActivePairs(GeolikError):
    """A composite likelihood has no pair with nonzero weight."""
    exit_code = 5


@dataclass(frozen=True)
class ParamVector:
    """
    Covariance parameters theta = (tau2, sigma2, range).

    Attributes:
        tau2: Nugget variance (>= 0)
        sigma2: Partial sill (> 0)
        range: Practical range (> 0), distance beyond which correlation < 0.05

    Example:
        >>> theta = ParamVector(tau2=0.1, sigma2=1.0, range=0.1)
        >>> theta.to_array()
        array([0.1, 1. , 0.1])
    """
    tau2: float
    sigma2: float
    range: float

    NAMES = ("tau2", "sigma2", "range")

    def __post_init__(self):
        """Validate parameter domain."""
        for name in self.NAMES:
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.tau2 < 0:
            raise ValueError(f"tau2 must be >= 0, got {self.tau2}")
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.range <= 0:
            raise ValueError(f"range must be positive, got {self.range}")

    @property
    def sill(self) -> float:
        """Total variance at the origin (sigma2 + tau2)."""
        return self.sigma2 + self.tau2

    def to_array(self) -> np.ndarray:
        """Return (tau2, sigma2, range) as a float array."""
        return np.array([self.tau2, self.sigma2, self.range], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ParamVector":
        """Build from a length-3 sequence ordered (tau2, sigma2, range)."""
        if len(values) != 3:
            raise ValueError(f"Expected 3 parameters, got {len(values)}")
        return cls(float(values[0]), float(values[1]), float(values[2]))

    @classmethod
    def parse(cls, text: str) -> "ParamVector":
        """
        Parse a ``tau2,sigma2,range`` string as used by CLI flags.

        Raises:
            ValueError: If the string does not hold three numbers
        """
        parts = [p.strip() for p in text.split(",") if p.strip()]
        try:
            return cls.from_array([float(p) for p in parts])
        except (TypeError, ValueError) as e:
            raise ValueError(f"Invalid parameter vector '{text}': {e}") from e

    def scaled(self, c: float) -> "ParamVector":
        """Rescale variances by c**2 for data multiplied by c."""
        return ParamVector(self.tau2 * c * c, self.sigma2 * c * c, self.range)

    def to_dict(self) -> Dict[str, float]:
        return {"tau2": self.tau2, "sigma2": self.sigma2, "range": self.range}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ParamVector":
        return cls(float(data["tau2"]), float(data["sigma2"]), float(data["range"]))


@dataclass
class SiteSet:
    """
    Planar observation sites with an optional aligned data vector.

    Attributes:
        coords: (n, 2) array of planar coordinates in common distance units
        data: Optional length-n array of observations Z_i aligned by index
    """
    coords: np.ndarray
    data: Optional[np.ndarray] = None

    def __post_init__(self):
        """Validate shapes and finiteness."""
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 2 or self.coords.shape[1] != 2:
            raise ValueError(f"Site coordinates must have shape (n, 2), got {self.coords.shape}")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("Site coordinates must be finite")
        if self.data is not None:
            self.data = np.asarray(self.data, dtype=float).ravel()
            if len(self.data) != len(self.coords):
                raise ValueError(
                    f"Data length {len(self.data)} does not match {len(self.coords)} sites"
                )
            if not np.all(np.isfinite(self.data)):
                raise ValueError("Data values must be finite")

    @property
    def n(self) -> int:
        """Number of sites."""
        return len(self.coords)

    @property
    def has_data(self) -> bool:
        """Whether a data vector is attached."""
        return self.data is not None

    def require_data(self) -> np.ndarray:
        """
        Return the data vector.

        Raises:
            DataError: If the site set carries no data
        """
        if self.data is None:
            raise DataError("Site set has no data vector")
        return self.data

    def with_data(self, data: np.ndarray) -> "SiteSet":
        """Same sites, new data vector."""
        return SiteSet(self.coords, data)

    def subset(self, indices: Sequence[int]) -> "SiteSet":
        """Sites (and data) restricted to the given indices, in that order."""
        idx = np.asarray(indices, dtype=int)
        data = None if self.data is None else self.data[idx]
        return SiteSet(self.coords[idx], data)

    def centered(self) -> Tuple["SiteSet", float]:
        """
        Subtract the sample mean from the data.

        Returns:
            Tuple of (centered site set, subtracted mean)
        """
        z = self.require_data()
        mean = float(np.mean(z))
        return SiteSet(self.coords, z - mean), mean

    def check_distinct(self) -> None:
        """
        Ensure no two sites share exact coordinates.

        Raises:
            DataError: If duplicate coordinates are present
        """
        unique = np.unique(self.coords, axis=0)
        if len(unique) != self.n:
            raise DataError(f"Site set contains {self.n - len(unique)} duplicate locations")

    def diameter_hint(self) -> float:
        """Diagonal of the bounding box of the sites."""
        if self.n == 0:
            return 0.0
        span = self.coords.max(axis=0) - self.coords.min(axis=0)
        return float(np.hypot(span[0], span[1]))


@dataclass
class PairConfiguration:
    """
    Partition of sites into labeled two-site blocks (a_i, b_i).

    Attributes:
        blocks: (n/2, 2) integer array; column 0 holds the a-sites, column 1 the b-sites
        n_sites: Size of the site set the configuration was built for
        excluded: Site indices left out (one index when n is odd)
    """
    blocks: np.ndarray
    n_sites: int
    excluded: Tuple[int, ...] = ()

    def __post_init__(self):
        """Validate that blocks form an exact partition of the used sites."""
        self.blocks = np.asarray(self.blocks, dtype=int).reshape(-1, 2)
        self.excluded = tuple(int(i) for i in self.excluded)
        if np.any(self.blocks[:, 0] == self.blocks[:, 1]):
            raise ValueError("A block cannot pair a site with itself")
        used = np.sort(np.concatenate([self.blocks.ravel(), np.asarray(self.excluded, dtype=int)]))
        if not np.array_equal(used, np.arange(self.n_sites)):
            raise ValueError("Pair configuration is not a partition of the site indices")

    @property
    def size(self) -> int:
        """Number of two-site blocks."""
        return len(self.blocks)

    @property
    def a(self) -> np.ndarray:
        """First (seed-nearest) site of every block."""
        return self.blocks[:, 0]

    @property
    def b(self) -> np.ndarray:
        """Second site of every block."""
        return self.blocks[:, 1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_sites": self.n_sites,
            "excluded": list(self.excluded),
            "blocks": self.blocks.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PairConfiguration":
        return cls(
            blocks=np.asarray(data["blocks"], dtype=int),
            n_sites=int(data["n_sites"]),
            excluded=tuple(data.get("excluded", ())),
        )


@dataclass
class BlockPartition:
    """
    Disjoint cluster blocks covering all sites, with centroids.

    Attributes:
        blocks: List of m integer index arrays
        centroids: (m, 2) array, mean coordinate of each block
        n_sites: Number of sites partitioned
    """
    blocks: List[np.ndarray]
    centroids: np.ndarray
    n_sites: int

    def __post_init__(self):
        """Validate partition exactness."""
        self.blocks = [np.asarray(b, dtype=int).ravel() for b in self.blocks]
        self.centroids = np.asarray(self.centroids, dtype=float).reshape(-1, 2)
        if any(len(b) == 0 for b in self.blocks):
            raise ValueError("Every block must be nonempty")
        if len(self.centroids) != len(self.blocks):
            raise ValueError("One centroid per block is required")
        used = np.sort(np.concatenate(self.blocks)) if self.blocks else np.array([], dtype=int)
        if not np.array_equal(used, np.arange(self.n_sites)):
            raise ValueError("Blocks are not a partition of the site indices")

    @property
    def m(self) -> int:
        """Number of blocks."""
        return len(self.blocks)

    @property
    def sizes(self) -> List[int]:
        """Number of sites in each block."""
        return [len(b) for b in self.blocks]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_sites": self.n_sites,
            "blocks": [b.tolist() for b in self.blocks],
            "centroids": self.centroids.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BlockPartition":
        return cls(
            blocks=[np.asarray(b, dtype=int) for b in data["blocks"]],
            centroids=np.asarray(data["centroids"], dtype=float),
            n_sites=int(data["n_sites"]),
        )


@dataclass
class EstimateResult:
    """
    Outcome of one maximization.

    Attributes:
        theta_hat: Fitted parameters
        objective_value: Objective at theta_hat
        iterations: Nelder-Mead iterations performed
        converged: Whether a convergence rule fired before the iteration cap
        message: Why the optimizer stopped
        trace: Best objective value per iteration (only when requested)
    """
    theta_hat: ParamVector
    objective_value: float
    iterations: int
    converged: bool
    message: str = ""
    trace: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta_hat": self.theta_hat.to_dict(),
            "objective_value": self.objective_value,
            "iterations": self.iterations,
            "converged": self.converged,
            "message": self.message,
        }


@dataclass
class RunManifest:
    """
    Reproducibility record written next to every CLI output.

    Attributes:
        command: Subcommand name
        options: Resolved options
        seed: Seed used by every random stream of the run
        inputs: Input file paths
        outputs: Output file paths
        timings: Wall-clock seconds per phase
        created: Creation timestamp
    """
    command: str
    options: Dict[str, Any]
    seed: int
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    created: datetime = field(default_factory=datetime.now)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "options": self.options,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings": self.timings,
            "created": self.created.isoformat(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, default=str)
