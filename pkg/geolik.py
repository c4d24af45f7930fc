#!/usr/bin/env python3
"""
CLI interface for geolik.
Usage: python geolik.py estimate --data sites.csv --method bicl --ds 0.1
"""
import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from core import ParamVector, RunManifest, BlockPartition, GeolikError, ConfigError
from config.manager import ConfigManager, StudyConfig
from data.sites import (
    EARTH_RADIUS_KM, generate_perturbed_grid, generate_uniform_sites,
    load_sites_csv, save_sites_csv,
)
from estimators import get_estimator, list_estimators
from estimators.base import BaseEstimator
from models import CorrelationFamily
from optim import OptimOptions
from partition import load_partition, save_partition
from predict import empirical_semivariogram, loo_rmse, semivariogram_overlay
from study import bench_timing, parametric_bootstrap, run_study, simulate_field

logger = logging.getLogger("geolik")

SEED_ENV = "GEOLIK_SEED"
EXIT_DATA = 3


def resolve_seed(seed: Optional[int]) -> int:
    """--seed, else $GEOLIK_SEED, else a fresh seed."""
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}")
    return int(np.random.SeedSequence().entropy % (2 ** 63))


def parse_theta(text: Optional[str]) -> Optional[ParamVector]:
    """Parse a tau2,sigma2,range flag; None passes through."""
    if text is None:
        return None
    try:
        return ParamVector.parse(text)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def parse_int_list(text: str) -> List[int]:
    """Parse a comma-separated list of integers such as --n 4000,8000."""
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"Expected comma-separated integers, got {text!r}")


class Run:
    """Output directory, seed and timings of one command."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.seed = resolve_seed(getattr(args, "seed", None))
        self.rng = np.random.default_rng(self.seed)
        self.output_dir = Path(args.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        options = {k: v for k, v in vars(args).items() if k != "func"}
        self.manifest = RunManifest(command=command, options=options, seed=self.seed)
        self._t0 = time.perf_counter()

    def phase(self, name: str) -> None:
        """Close the current phase under ``name``."""
        now = time.perf_counter()
        self.manifest.timings[name] = now - self._t0
        self._t0 = now

    def input(self, path) -> None:
        """Record an input file in the manifest."""
        self.manifest.inputs.append(str(path))

    def output(self, name: str) -> Path:
        """Path of an output file, recorded in the manifest."""
        path = self.output_dir / name
        self.manifest.outputs.append(str(path))
        return path

    def finish(self) -> Path:
        path = self.output_dir / "manifest.json"
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.manifest.to_json())
        print(f"📁 Manifest saved to {path}")
        return path


def write_json(path: Path, payload: Dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)


def load_data(args, run: Run):
    """Read the data CSV and mean-center it."""
    print(f"📊 Loading sites from {args.data}")
    sites = load_sites_csv(args.data, earth_radius=args.earth_radius)
    run.input(args.data)
    centered, mean = sites.centered()
    print(f"✅ Loaded {sites.n} sites (subtracted mean {mean:.6g})")
    return centered, mean


def optim_options(args, estimator: BaseEstimator, initial: Optional[ParamVector] = None) -> OptimOptions:
    """--init, else the given start, else the estimator default."""
    start = parse_theta(args.init) or initial or estimator.default_start()
    return OptimOptions(initial=start, max_iterations=args.max_iter, tolerance=args.tol)


def replayed_partition(args, run: Run) -> Dict:
    """Partition keyword for get_estimator from --partition, empty when not given."""
    if not args.partition:
        return {}
    loaded = load_partition(args.partition)
    run.input(args.partition)
    if isinstance(loaded, BlockPartition):
        if args.method.lower() != "bcl":
            raise ConfigError(f"{args.partition} holds cluster blocks; only bcl can replay it")
        print(f"♻️  Replaying {loaded.m} blocks from {args.partition}")
        return {"partition": loaded}
    if args.method.lower() != "bicl":
        raise ConfigError(f"{args.partition} holds pair configurations; only bicl can replay it")
    print(f"♻️  Replaying {len(loaded)} pair configurations from {args.partition}")
    return {"ensemble": loaded}


def make_estimator(args, sites, run: Run) -> BaseEstimator:
    """Estimator described by the method flags, drawing partitions from the run stream."""
    return get_estimator(
        args.method,
        sites,
        args.family,
        rng=run.rng,
        ds=args.ds,
        configurations=args.configurations,
        weight_rule=args.weight_rule,
        blocks=args.blocks,
        block_threshold=args.block_threshold,
        block_pairing=args.block_pairing,
        **replayed_partition(args, run),
    )


def save_estimator_partition(estimator: BaseEstimator, run: Run) -> None:
    if hasattr(estimator, "ensemble"):
        save_partition(estimator.ensemble, run.output("partition.json"))
    elif hasattr(estimator, "partition"):
        save_partition(estimator.partition, run.output("partition.json"))


def cmd_simulate(args) -> None:
    """Write a simulated dataset."""
    run = Run("simulate", args)
    theta = parse_theta(args.theta)
    family = CorrelationFamily.parse(args.family)

    if args.sites:
        sites = load_sites_csv(args.sites, earth_radius=args.earth_radius, require_data=False)
        run.input(args.sites)
    elif args.scheme == "uniform":
        sites = generate_uniform_sites(args.n, run.rng, args.extent)
    else:
        sites = generate_perturbed_grid(args.n, run.rng, args.spacing, args.jitter, args.extent)

    print(f"🔄 Simulating {family.value} field on {sites.n} sites")
    sites = simulate_field(sites, family, theta, run.rng)
    run.phase("simulate")

    path = run.output("sites.csv")
    save_sites_csv(sites, path)
    print(f"📁 Sites saved to {path}")
    run.finish()


def cmd_estimate(args) -> None:
    """Fit one method to a dataset."""
    run = Run("estimate", args)
    sites, mean = load_data(args, run)

    print(f"🚀 Building {args.method} objective ({args.family})")
    estimator = make_estimator(args, sites, run)
    run.phase("setup")

    result = estimator.fit(optim_options(args, estimator))
    run.phase("fit")

    status = "✅" if result.converged else "⚠️"
    print(f"{status} {result.message} after {result.iterations} iterations")
    print(f"   theta = {result.theta_hat.to_dict()}")

    path = run.output("estimate.json")
    write_json(path, {**result.to_dict(), "mean": mean, "estimator": estimator.describe(), "n": sites.n})
    save_estimator_partition(estimator, run)
    print(f"📁 Estimate saved to {path}")
    run.finish()


def cmd_mc_study(args) -> None:
    """Run a Monte Carlo study from a config file or named config."""
    run = Run("mc-study", args)
    config_path = Path(args.config)
    if config_path.suffix in (".json", ".yaml", ".yml"):
        config = StudyConfig.load(config_path)
    else:
        manager = ConfigManager(args.config_dir)
        config = manager.get(args.config)
        if config is None:
            print(f"❌ Config not found for {args.config}")
            print("Creating default configs...")
            manager.create_default_configs()
            config = manager.get(args.config)
        if config is None:
            raise ConfigError(f"Unknown study config: {args.config}. Available: {manager.list_configs()}")
        config_path = Path(args.config_dir) / f"{args.config}.json"
    run.input(config_path)

    overrides = {}
    if args.replicates is not None:
        overrides["replicates"] = args.replicates
    if args.seed is not None or os.environ.get(SEED_ENV):
        overrides["seed"] = run.seed
    if overrides:
        config = StudyConfig.from_dict({**config.to_dict(), **overrides})
    run.manifest.seed = config.seed

    print(f"🔄 Running study '{config.name}': {config.replicates} replicates, {len(config.methods)} methods")
    result = run_study(config, threads=args.threads, verbose=args.verbose)
    run.phase("study")

    print(result.summary())
    for path in result.save(run.output_dir):
        run.manifest.outputs.append(str(path))
        print(f"📁 Saved {path}")
    run.finish()


def cmd_bootstrap(args) -> None:
    """Parametric bootstrap standard errors of a fitted method."""
    run = Run("bootstrap", args)
    sites, mean = load_data(args, run)
    estimator = make_estimator(args, sites, run)

    theta_hat = parse_theta(args.theta)
    if theta_hat is None:
        print(f"🚀 Fitting {args.method} before bootstrapping")
        theta_hat = estimator.fit(optim_options(args, estimator)).theta_hat
    run.phase("fit")

    print(f"🔄 Bootstrapping {args.replicates} replicates from {theta_hat.to_dict()}")
    options = optim_options(args, estimator, initial=theta_hat)
    result = parametric_bootstrap(
        estimator, theta_hat, run.rng,
        replicates=args.replicates, options=options, threads=args.threads,
    )
    run.phase("bootstrap")

    print(f"✅ Standard errors: {result.standard_errors} ({result.failures} failed refits)")
    estimates_path = run.output("bootstrap.csv")
    result.to_frame().to_csv(estimates_path, index=False, float_format="%.17g")
    summary_path = run.output("bootstrap.json")
    write_json(summary_path, {**result.to_dict(), "mean": mean, "estimator": estimator.describe()})
    print(f"📁 Bootstrap estimates saved to {estimates_path}")
    run.finish()


def cmd_variogram(args) -> None:
    """Empirical semi-variogram, with an optional fitted-model curve."""
    run = Run("variogram", args)
    sites, _ = load_data(args, run)

    estimate = empirical_semivariogram(sites, n_bins=args.bins, max_lag=args.max_lag)
    run.phase("variogram")
    path = run.output("variogram.csv")
    estimate.to_frame().to_csv(path, index=False, float_format="%.17g")
    print(f"📁 Semi-variogram saved to {path}")

    theta = parse_theta(args.theta)
    if theta is not None:
        # First bin is (0, w] with center w/2, so the last edge is last center + w/2.
        max_lag = float(estimate.bin_centers[-1] + estimate.bin_centers[0])
        overlay = semivariogram_overlay(args.family, theta, max_lag)
        model_path = run.output("variogram_model.csv")
        overlay.to_csv(model_path, index=False, float_format="%.17g")
        print(f"📁 Model curve saved to {model_path}")
    run.finish()


def cmd_krige_loo(args) -> None:
    """Leave-one-out simple kriging RMSE."""
    run = Run("krige-loo", args)
    sites, mean = load_data(args, run)
    theta = parse_theta(args.theta)

    print(f"🔄 Leave-one-out kriging on {args.subsample or sites.n} sites")
    rmse = loo_rmse(sites, args.family, theta, subsample=args.subsample, rng=run.rng, threads=args.threads)
    run.phase("loo")

    print(f"✅ LOO RMSE = {rmse:.6g}")
    path = run.output("loo.json")
    write_json(path, {
        "rmse": rmse,
        "family": CorrelationFamily.parse(args.family).value,
        "theta": theta.to_dict(),
        "folds": min(args.subsample or sites.n, sites.n),
        "mean": mean,
    })
    print(f"📁 Result saved to {path}")
    run.finish()


def cmd_bench_timing(args) -> None:
    """Time bi-CL evaluation against BCL Cholesky lower bounds."""
    run = Run("bench-timing", args)
    n_values = parse_int_list(args.n)

    def progress(row):
        print(f"   n={row['n']:>6}  bi-CL {row['bicl_seconds']:.3f}s  "
              f"BCL8 {row['bcl8_bound_seconds']:.3f}s  BCL16 {row['bcl16_bound_seconds']:.3f}s")

    print(f"📊 Timing n = {n_values}")
    table = bench_timing(
        n_values, run.rng, ds=args.ds, family=args.family,
        include_bounds=not args.no_bounds, progress=progress,
    )
    run.phase("bench")

    path = run.output("timing.csv")
    table.to_csv(path, index=False)
    print(f"📁 Timings saved to {path}")
    run.finish()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output-dir", "-o", default="output",
                   help="Directory for outputs and manifest.json")
    p.add_argument("--seed", type=int, default=None,
                   help=f"Seed for every random stream (fallback: ${SEED_ENV})")
    p.add_argument("--threads", type=int, default=None,
                   help="Worker cap for replicates and folds (default: all cores)")
    p.add_argument("--verbose", "-v", action="store_true", help="Verbose logging")


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", "-d", required=True, help="CSV with x,y,z or lon,lat,z")
    p.add_argument("--earth-radius", type=float, default=EARTH_RADIUS_KM,
                   help="Sphere radius in km for lon/lat projection")
    p.add_argument("--family", "-f", default="exponential",
                   help="Correlation family: exponential, matern15, cauchy")


def _add_method(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", "-m", default="bicl", help=f"Estimator: {', '.join(list_estimators())}")
    p.add_argument("--ds", type=float, default=None, help="Weighting threshold for pcl and bicl")
    p.add_argument("--configurations", "-C", type=int, default=1, help="Pair configurations for bicl")
    p.add_argument("--weight-rule", default="first", help="bicl block distance: first, min, max, mean")
    p.add_argument("--blocks", type=int, default=None, help="Cluster blocks for bcl")
    p.add_argument("--block-threshold", type=float, default=float("inf"),
                   help="Centroid distance threshold for bcl")
    p.add_argument("--block-pairing", default="threshold", help="bcl pairing: threshold or nearest")
    p.add_argument("--partition", default=None,
                   help="partition.json from an earlier run to reuse instead of drawing one (bicl, bcl)")
    p.add_argument("--max-iter", type=int, default=10_000, help="Nelder-Mead iteration cap")
    p.add_argument("--tol", type=float, default=1e-16, help="Nelder-Mead tolerance")
    p.add_argument("--init", default=None, help="Starting point tau2,sigma2,range")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Composite likelihood estimation for Gaussian random fields",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python geolik.py simulate --family matern15 --theta 0.1,1,0.1 --n 500 --seed 1 -o sim
  python geolik.py estimate --data sim/sites.csv --method bicl --ds 0.1 -C 5 --seed 1 -o fit
  python geolik.py mc-study --config sweep_matern --replicates 100 -o matern
  python geolik.py bench-timing --n 2240,4480,8960 -o timing
        """
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Simulate a dataset")
    _add_common(p)
    p.add_argument("--family", "-f", default="exponential")
    p.add_argument("--theta", required=True, help="tau2,sigma2,range")
    p.add_argument("--n", type=int, default=500, help="Number of sites")
    p.add_argument("--sites", default=None, help="Optional CSV of sites to simulate on")
    p.add_argument("--scheme", choices=["grid", "uniform"], default="grid")
    p.add_argument("--spacing", type=float, default=0.03)
    p.add_argument("--jitter", type=float, default=0.01)
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--earth-radius", type=float, default=EARTH_RADIUS_KM)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="Fit a method to data")
    _add_common(p)
    _add_data(p)
    _add_method(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mc-study", help="Run a Monte Carlo study")
    _add_common(p)
    p.add_argument("--config", "-c", required=True, help="Study config file or name")
    p.add_argument("--config-dir", default="config", help="Directory of named configs")
    p.add_argument("--replicates", "-R", type=int, default=None, help="Override replicate count")
    p.set_defaults(func=cmd_mc_study)

    p = sub.add_parser("bootstrap", help="Parametric bootstrap standard errors")
    _add_common(p)
    _add_data(p)
    _add_method(p)
    p.add_argument("--theta", default=None, help="Fitted tau2,sigma2,range (fit first if absent)")
    p.add_argument("--replicates", "-B", type=int, default=100)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("variogram", help="Empirical semi-variogram")
    _add_common(p)
    _add_data(p)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--max-lag", type=float, default=None)
    p.add_argument("--theta", default=None, help="Fitted tau2,sigma2,range for the model curve")
    p.set_defaults(func=cmd_variogram)

    p = sub.add_parser("krige-loo", help="Leave-one-out kriging RMSE")
    _add_common(p)
    _add_data(p)
    p.add_argument("--theta", required=True, help="tau2,sigma2,range")
    p.add_argument("--subsample", type=int, default=None, help="Random subset of left-out sites")
    p.set_defaults(func=cmd_krige_loo)

    p = sub.add_parser("bench-timing", help="Time bi-CL against BCL Cholesky bounds")
    _add_common(p)
    p.add_argument("--n", default="2240,4480,8960,17920,21440", help="Comma-separated site counts")
    p.add_argument("--ds", type=float, default=0.1)
    p.add_argument("--family", "-f", default="exponential")
    p.add_argument("--no-bounds", action="store_true", help="Skip the Cholesky bounds")
    p.set_defaults(func=cmd_bench_timing)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        args.func(args)
    except GeolikError as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"❌ Invalid input: {e}", file=sys.stderr)
        return ConfigError.exit_code
    except OSError as e:
        print(f"❌ I/O error: {e}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
