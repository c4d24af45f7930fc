"""
Site geometry and ingestion.

Distances, synthetic site designs, sinusoidal projection of lon/lat
coordinates, and CSV reading/writing of site sets.
"""
import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist, pdist, squareform

from core import SiteSet, DataError

logger = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0

PLANAR_COLUMNS = ("x", "y")
GEOGRAPHIC_COLUMNS = ("lon", "lat")


def euclidean_distance(p: Sequence[float], q: Sequence[float]) -> float:
    """
    Euclidean distance between two planar points.

    Raises:
        ValueError: If either point has non-finite coordinates
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise ValueError("Coordinates must be finite")
    return float(np.hypot(p[0] - q[0], p[1] - q[1]))


def pairwise_distances(coords: np.ndarray, other: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Distance matrix between site arrays.

    Args:
        coords: (n, 2) coordinates
        other: Optional (m, 2) coordinates; defaults to coords

    Returns:
        (n, n) symmetric matrix when other is None, else (n, m)
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    if other is None:
        if len(coords) < 2:
            return np.zeros((len(coords), len(coords)))
        return squareform(pdist(coords))
    return cdist(coords, np.asarray(other, dtype=float).reshape(-1, 2))


def generate_perturbed_grid(
    n_select: int,
    rng: np.random.Generator,
    spacing: float = 0.03,
    jitter_halfwidth: float = 0.01,
    extent: float = 1.0
) -> SiteSet:
    """
    Jittered regular grid design.

    A grid with the given spacing over [0, extent]^2 is perturbed by
    U[-jitter_halfwidth, jitter_halfwidth] per coordinate, then n_select
    points are drawn without replacement.

    Args:
        n_select: Number of sites to keep
        rng: Random generator
        spacing: Grid increment (default: 0.03)
        jitter_halfwidth: Half-width of the uniform jitter (default: 0.01)
        extent: Side of the square domain (default: 1.0)

    Returns:
        SiteSet with n_select sites

    Raises:
        ValueError: If spacing <= 0 or n_select exceeds the grid size
    """
    if spacing <= 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    if jitter_halfwidth < 0:
        raise ValueError(f"jitter_halfwidth must be >= 0, got {jitter_halfwidth}")
    per_axis = int(np.floor(extent / spacing + 1e-9)) + 1
    axis = spacing * np.arange(per_axis)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])

    if n_select > len(grid):
        raise ValueError(f"Cannot select {n_select} sites from a grid of {len(grid)} points")
    if n_select < 0:
        raise ValueError(f"n_select must be >= 0, got {n_select}")

    jitter = rng.uniform(-jitter_halfwidth, jitter_halfwidth, size=grid.shape)
    candidates = grid + jitter
    chosen = rng.choice(len(candidates), size=n_select, replace=False)
    return SiteSet(candidates[chosen])


def generate_uniform_sites(n: int, rng: np.random.Generator, extent: float = 1.0) -> SiteSet:
    """Sites drawn uniformly on [0, extent]^2."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return SiteSet(rng.uniform(0.0, extent, size=(n, 2)))


def sinusoidal_project(
    lon: Union[float, np.ndarray],
    lat: Union[float, np.ndarray],
    earth_radius: float = EARTH_RADIUS_KM
) -> Tuple[Union[float, np.ndarray], Union[float, np.ndarray]]:
    """
    Sinusoidal projection with central meridian at longitude 0.

    Args:
        lon: Longitude(s) in degrees, within [-180, 180]
        lat: Latitude(s) in degrees, within [-90, 90]
        earth_radius: Sphere radius in km (default: 6371)

    Returns:
        Tuple (x, y) in km

    Raises:
        ValueError: If any coordinate is outside its valid range
    """
    lon_arr = np.asarray(lon, dtype=float)
    lat_arr = np.asarray(lat, dtype=float)
    if np.any(~np.isfinite(lon_arr)) or np.any(np.abs(lon_arr) > 180):
        raise ValueError("Longitude must lie in [-180, 180]")
    if np.any(~np.isfinite(lat_arr)) or np.any(np.abs(lat_arr) > 90):
        raise ValueError("Latitude must lie in [-90, 90]")
    lat_rad = np.deg2rad(lat_arr)
    x = earth_radius * np.deg2rad(lon_arr) * np.cos(lat_rad)
    y = earth_radius * lat_rad
    if x.ndim == 0:
        return float(x), float(y)
    return x, y


def load_sites_csv(
    path: Union[str, Path],
    earth_radius: float = EARTH_RADIUS_KM,
    require_data: bool = True
) -> SiteSet:
    """
    Read a site CSV.

    Accepts header ``x,y,z`` (planar) or ``lon,lat,z`` (projected on read).

    Args:
        path: CSV file path
        earth_radius: Radius used when projecting lon/lat
        require_data: Whether the ``z`` column is mandatory

    Returns:
        SiteSet

    Raises:
        FileNotFoundError: If the file doesn't exist
        DataError: If columns are missing or values are invalid
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Site file not found: {path}")

    try:
        df = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot parse {path}: {e}") from e

    df.columns = [str(c).strip().lower() for c in df.columns]

    try:
        if set(PLANAR_COLUMNS) <= set(df.columns):
            coords = df[list(PLANAR_COLUMNS)].to_numpy(dtype=float)
        elif set(GEOGRAPHIC_COLUMNS) <= set(df.columns):
            x, y = sinusoidal_project(
                df["lon"].to_numpy(dtype=float),
                df["lat"].to_numpy(dtype=float),
                earth_radius
            )
            coords = np.column_stack([x, y])
            logger.info("Projected %d lon/lat sites with radius %.1f km", len(df), earth_radius)
        else:
            raise DataError(f"{path} needs columns x,y or lon,lat; found {list(df.columns)}")

        data = None
        if "z" in df.columns:
            data = df["z"].to_numpy(dtype=float)
        elif require_data:
            raise DataError(f"{path} has no 'z' column")
        return SiteSet(coords, data)
    except ValueError as e:
        if isinstance(e, DataError):
            raise
        raise DataError(f"Invalid values in {path}: {e}") from e


def save_sites_csv(sites: SiteSet, path: Union[str, Path]) -> None:
    """Write a site set as ``x,y[,z]`` CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame({"x": sites.coords[:, 0], "y": sites.coords[:, 1]})
    if sites.data is not None:
        df["z"] = sites.data
    df.to_csv(path, index=False, float_format="%.17g")
