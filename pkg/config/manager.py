"""
Configuration management for simulation studies.

This module handles loading, saving, and managing study configurations
from JSON or YAML files.
"""
import json
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml

from core import ParamVector, ConfigError
from models import CorrelationFamily

logger = logging.getLogger(__name__)

METHODS = ("ml", "pcl", "bicl", "bcl")
SITE_SCHEMES = ("grid", "uniform")
START_POLICIES = ("default", "truth")


@dataclass
class MethodSpec:
    """
    One estimator entry of a study.

    Attributes:
        label: Column name in result tables (must be unique within a study)
        method: Estimator token: ml, pcl, bicl or bcl
        ds: Weighting threshold for pcl and bicl
        configurations: Number of pair configurations C for bicl (default: 1)
        weight_rule: Block distance rule for bicl: first, min, max or mean
        blocks: Number of cluster blocks m for bcl
        block_threshold: Centroid threshold for bcl (None = every pair)
        block_pairing: threshold or nearest

    Example:
        >>> spec = MethodSpec(label="bicl_0.1", method="bicl", ds=0.1, configurations=5)
    """
    label: str
    method: str
    ds: Optional[float] = None
    configurations: int = 1
    weight_rule: str = "first"
    blocks: Optional[int] = None
    block_threshold: Optional[float] = None
    block_pairing: str = "threshold"

    def __post_init__(self):
        """Validate method settings."""
        self.method = str(self.method).lower()
        if not self.label:
            raise ConfigError("Method label must not be empty")
        if self.method not in METHODS:
            raise ConfigError(f"Unknown method: {self.method}. Available: {list(METHODS)}")
        if self.method in ("pcl", "bicl"):
            if self.ds is None or not self.ds >= 0:
                raise ConfigError(f"{self.label}: ds must be >= 0 for {self.method}, got {self.ds}")
        if self.configurations < 1:
            raise ConfigError(f"{self.label}: configurations must be >= 1, got {self.configurations}")
        if self.weight_rule not in ("first", "min", "max", "mean"):
            raise ConfigError(f"{self.label}: unknown weight rule {self.weight_rule}")
        if self.method == "bcl":
            if self.blocks is None or self.blocks < 2:
                raise ConfigError(f"{self.label}: bcl needs blocks >= 2, got {self.blocks}")
            if self.block_pairing not in ("threshold", "nearest"):
                raise ConfigError(f"{self.label}: unknown block pairing {self.block_pairing}")

    @property
    def threshold(self) -> float:
        """Centroid threshold with None read as infinity."""
        return math.inf if self.block_threshold is None else float(self.block_threshold)

    def settings_key(self) -> Tuple:
        """Every setting except the label; equal keys give identical estimators."""
        return tuple(getattr(self, f.name) for f in fields(self) if f.name != "label")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MethodSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown method fields: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class StudyConfig:
    """
    Monte Carlo study configuration.

    Attributes:
        name: Human-readable study name
        family: Correlation family token
        theta_true: True parameters (tau2, sigma2, range)
        n: Number of sites
        replicates: Number of Monte Carlo replicates R (default: 100)
        seed: Base seed
        fixed_sites: Draw one site set for all replicates (default: True)
        site_scheme: grid (perturbed grid) or uniform
        spacing: Grid spacing of the perturbed grid
        jitter: Half-width of the uniform jitter added to grid nodes
        extent: Side length of the square domain
        start: Starting point policy: default or truth
        max_iterations: Optimizer iteration cap
        tolerance: Optimizer tolerance
        methods: Estimators to compare; one must be ml

    Example:
        >>> config = StudyConfig(
        ...     name="smoke",
        ...     family="exponential",
        ...     theta_true=ParamVector(0.1, 1.0, 0.1),
        ...     n=40,
        ...     replicates=2,
        ...     methods=[MethodSpec("ml", "ml"), MethodSpec("pcl", "pcl", ds=0.3)]
        ... )
        >>> config.save("config/smoke.json")
    """
    name: str
    family: str
    theta_true: ParamVector
    n: int = 500
    replicates: int = 100
    seed: int = 0
    fixed_sites: bool = True
    site_scheme: str = "grid"
    spacing: float = 0.03
    jitter: float = 0.01
    extent: float = 1.0
    start: str = "default"
    max_iterations: int = 10_000
    tolerance: float = 1e-16
    methods: List[MethodSpec] = field(default_factory=list)

    def __post_init__(self):
        """Validate configuration parameters."""
        self.family = CorrelationFamily.parse(self.family).value
        if isinstance(self.theta_true, dict):
            self.theta_true = ParamVector.from_dict(self.theta_true)
        elif isinstance(self.theta_true, (list, tuple)):
            self.theta_true = ParamVector.from_array(self.theta_true)
        self.methods = [m if isinstance(m, MethodSpec) else MethodSpec.from_dict(m) for m in self.methods]

        if self.n < 2:
            raise ConfigError(f"n must be >= 2, got {self.n}")
        if self.replicates < 2:
            raise ConfigError(f"replicates must be >= 2, got {self.replicates}")
        if self.site_scheme not in SITE_SCHEMES:
            raise ConfigError(f"Unknown site scheme: {self.site_scheme}. Available: {list(SITE_SCHEMES)}")
        if self.start not in START_POLICIES:
            raise ConfigError(f"Unknown start policy: {self.start}. Available: {list(START_POLICIES)}")
        if not (self.spacing > 0 and self.extent > 0 and self.jitter >= 0):
            raise ConfigError("spacing and extent must be positive and jitter nonnegative")
        if self.max_iterations < 1 or not self.tolerance > 0:
            raise ConfigError("max_iterations must be >= 1 and tolerance > 0")
        if not self.methods:
            raise ConfigError("A study needs at least one method")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"Method labels must be unique, got {labels}")
        if not any(m.method == "ml" for m in self.methods):
            raise ConfigError("A study needs an ml method as the efficiency benchmark")

    @property
    def benchmark(self) -> str:
        """Label of the first ml method."""
        return next(m.label for m in self.methods if m.method == "ml")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "StudyConfig":
        """
        Create config from dictionary.

        Args:
            data: Dictionary with config fields

        Returns:
            StudyConfig instance

        Raises:
            ConfigError: On missing or unknown fields
        """
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown study fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid study config: {e}") from e
        except ValueError as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from e

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert config to dictionary.

        Returns:
            Dictionary representation of config
        """
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["theta_true"] = self.theta_true.to_dict()
        data["methods"] = [m.to_dict() for m in self.methods]
        return data

    @classmethod
    def load(cls, path: Union[str, Path]) -> "StudyConfig":
        """
        Load config from JSON or YAML file.

        Args:
            path: Path to config file (.json or .yaml/.yml)

        Returns:
            StudyConfig instance

        Raises:
            FileNotFoundError: If file doesn't exist
            ConfigError: If file format or content is invalid
        """
        path = Path(path)

        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")

        with open(path, "r", encoding="utf-8") as f:
            try:
                if path.suffix in (".yaml", ".yml"):
                    data = yaml.safe_load(f)
                elif path.suffix == ".json":
                    data = json.load(f)
                else:
                    raise ConfigError(f"Unsupported config format: {path.suffix}")
            except (json.JSONDecodeError, yaml.YAMLError) as e:
                raise ConfigError(f"Cannot parse {path}: {e}") from e

        if not isinstance(data, dict):
            raise ConfigError(f"Config {path} must contain a mapping")
        return cls.from_dict(data)

    def save(self, path: Union[str, Path]) -> None:
        """
        Save config to file.

        Args:
            path: Destination path (.json or .yaml/.yml)
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)

        with open(path, "w", encoding="utf-8") as f:
            if path.suffix in (".yaml", ".yml"):
                yaml.safe_dump(self.to_dict(), f, default_flow_style=False, sort_keys=False)
            else:
                json.dump(self.to_dict(), f, indent=2)


def _threshold_sweep(prefix: str, method: str, thresholds: List[float], **settings) -> List[MethodSpec]:
    return [MethodSpec(label=f"{prefix}_{ds:g}", method=method, ds=ds, **settings) for ds in thresholds]


def _sweep_methods() -> List[MethodSpec]:
    thresholds = [0.05, 0.1, 0.15]
    return (
        [MethodSpec(label="ml", method="ml")]
        + _threshold_sweep("pcl", "pcl", thresholds)
        + _threshold_sweep("bicl", "bicl", thresholds, configurations=5)
        + [
            MethodSpec(label="bcl_16", method="bcl", blocks=16, block_threshold=0.3),
            MethodSpec(label="bcl_25", method="bcl", blocks=25, block_threshold=0.25),
            MethodSpec(label="bcl_36", method="bcl", blocks=36, block_threshold=0.2),
        ]
    )


class ConfigManager:
    """
    Manage named study configurations.

    Provides centralized access to study configurations with
    automatic loading and caching.

    Example:
        >>> mgr = ConfigManager("config")
        >>> config = mgr.get("sweep_matern")
        >>> configs = mgr.load_all()
    """

    def __init__(self, config_dir: Union[str, Path] = "config"):
        """
        Initialize config manager.

        Args:
            config_dir: Directory containing config files
        """
        self.config_dir = Path(config_dir)
        self.config_dir.mkdir(parents=True, exist_ok=True)
        self._configs: Dict[str, StudyConfig] = {}

    def load_all(self) -> Dict[str, StudyConfig]:
        """
        Load all study configs from the config directory.

        Configs that fail to parse are skipped with a warning.

        Returns:
            Dictionary mapping config names to StudyConfig objects
        """
        for ext in (".json", ".yaml", ".yml"):
            for config_file in self.config_dir.glob(f"*{ext}"):
                try:
                    self._configs[config_file.stem] = StudyConfig.load(config_file)
                except ConfigError as e:
                    logger.warning("Failed to load %s: %s", config_file, e)
        return self._configs

    def get(self, name: str) -> Optional[StudyConfig]:
        """
        Get config by name.

        Args:
            name: Config name (e.g., "sweep_exponential")

        Returns:
            StudyConfig or None if not found
        """
        if name not in self._configs:
            for ext in (".json", ".yaml", ".yml"):
                config_path = self.config_dir / f"{name}{ext}"
                if config_path.exists():
                    self._configs[name] = StudyConfig.load(config_path)
                    break
        return self._configs.get(name)

    def save(self, name: str, config: StudyConfig) -> None:
        """
        Save a config to disk.

        Args:
            name: Config name (used as filename)
            config: StudyConfig to save
        """
        self._configs[name] = config
        config.save(self.config_dir / f"{name}.json")

    def create_default_configs(self) -> Dict[str, StudyConfig]:
        """
        Create the default study configs.

        A two-replicate smoke study, the three single-family threshold
        sweeps at range 0.1 and a block-count comparison.

        Returns:
            Dictionary of all created configs
        """
        truth = ParamVector(tau2=0.1, sigma2=1.0, range=0.1)
        configs = {
            "smoke": StudyConfig(
                name="Smoke",
                family="exponential",
                theta_true=truth,
                n=40,
                replicates=2,
                seed=1,
                methods=[
                    MethodSpec(label="ml", method="ml"),
                    MethodSpec(label="pcl_0.3", method="pcl", ds=0.3),
                    MethodSpec(label="bicl_0.3", method="bicl", ds=0.3, configurations=2),
                    MethodSpec(label="bcl_4", method="bcl", blocks=4),
                ],
            ),
            "sweep_exponential": StudyConfig(
                name="Exponential, range 0.1",
                family="exponential",
                theta_true=truth,
                seed=101,
                methods=_sweep_methods(),
            ),
            "sweep_matern": StudyConfig(
                name="Matern 1.5, range 0.1",
                family="matern15",
                theta_true=truth,
                seed=102,
                methods=_sweep_methods(),
            ),
            "sweep_cauchy": StudyConfig(
                name="Cauchy, range 0.1",
                family="cauchy",
                theta_true=truth,
                seed=103,
                methods=_sweep_methods(),
            ),
            "block_spectrum": StudyConfig(
                name="Block count comparison",
                family="exponential",
                theta_true=truth,
                seed=104,
                methods=[
                    MethodSpec(label="ml", method="ml"),
                    MethodSpec(label="bicl_0.1", method="bicl", ds=0.1, configurations=5),
                    MethodSpec(label="bcl_8", method="bcl", blocks=8),
                    MethodSpec(label="bcl_16", method="bcl", blocks=16, block_threshold=0.3),
                    MethodSpec(label="bcl_nearest_25", method="bcl", blocks=25, block_pairing="nearest"),
                ],
            ),
        }

        for name, config in configs.items():
            self.save(name, config)

        return configs

    def list_configs(self) -> List[str]:
        """
        List all available config names.

        Returns:
            List of config names (without extensions)
        """
        names = set()
        for ext in (".json", ".yaml", ".yml"):
            for config_file in self.config_dir.glob(f"*{ext}"):
                names.add(config_file.stem)
        return sorted(names)
