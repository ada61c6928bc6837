"""Site geometry, powered-exponential correlation and the spatial slant field."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SiteSet",
    "CorrelationConfig",
    "CorrelationMatrix",
    "PositiveDefiniteError",
    "pairwise_distances",
    "powered_exponential_correlation",
    "build_correlation_matrix",
    "slant_field",
    "uniform_sites",
    "sites_from_csv",
]

_DUPLICATE_TOL = 1e-12


class PositiveDefiniteError(ValueError):
    """A matrix that must be positive definite is numerically singular."""


@dataclass(frozen=True)
class SiteSet:
    """A fixed collection of d distinct sites in R^k."""

    coords: np.ndarray
    site_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        if coords.ndim != 2 or coords.shape[0] < 1:
            raise ValueError("coords must be a (d, k) array with d >= 1")
        object.__setattr__(self, "coords", coords)
        dist = _pairwise(coords)
        d = coords.shape[0]
        if d > 1:
            off = dist[~np.eye(d, dtype=bool)]
            if off.min() <= _DUPLICATE_TOL:
                raise ValueError("duplicate sites: pairwise distance below tolerance")
        # distances are immutable once validated; cache them on the instance
        object.__setattr__(self, "_distances", dist)

    @property
    def d(self) -> int:
        return self.coords.shape[0]

    @property
    def k(self) -> int:
        return self.coords.shape[1]

    @property
    def distances(self) -> np.ndarray:
        return self._distances

    def subset(self, idx) -> "SiteSet":
        idx = list(idx)
        ids = tuple(self.site_ids[i] for i in idx) if self.site_ids else None
        return SiteSet(self.coords[idx], ids)


@dataclass(frozen=True)
class CorrelationConfig:
    """Powered-exponential correlation rho(h) = exp(-(h/r)^eta)."""

    r: float
    eta: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"range r must be positive, got {self.r}")
        if not 0 < self.eta <= 2:
            raise ValueError(f"smooth eta must lie in (0, 2], got {self.eta}")


@dataclass(frozen=True)
class CorrelationMatrix:
    """A symmetric positive definite correlation matrix with unit diagonal."""

    values: np.ndarray
    cholesky: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("correlation matrix must be square")
        if not np.allclose(values, values.T):
            raise ValueError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(values), 1.0):
            raise ValueError("correlation matrix must have unit diagonal")
        try:
            chol = np.linalg.cholesky(values)
        except np.linalg.LinAlgError as exc:
            raise PositiveDefiniteError(
                "correlation matrix is not positive definite"
            ) from exc
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "cholesky", chol)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def _pairwise(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def pairwise_distances(sites: SiteSet) -> np.ndarray:
    """Symmetric matrix of Euclidean distances between all site pairs."""
    return sites.distances.copy()


def powered_exponential_correlation(h, cfg: CorrelationConfig):
    """rho(h) = exp(-(h/r)^eta) for h >= 0; returns 1 exactly at h = 0."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValueError("distance h must be nonnegative")
    out = np.exp(-((h / cfg.r) ** cfg.eta))
    return float(out) if out.ndim == 0 else out


def build_correlation_matrix(sites: SiteSet, cfg: CorrelationConfig) -> CorrelationMatrix:
    """Correlation matrix rho(||s_i - s_j||) over a site set.

    Raises PositiveDefiniteError if the Cholesky factorization fails; no
    jitter repair is attempted.
    """
    values = powered_exponential_correlation(sites.distances, cfg)
    np.fill_diagonal(values, 1.0)
    return CorrelationMatrix(values)


def slant_field(sites: SiteSet, beta) -> np.ndarray:
    """Spatially varying slant alpha_i at each site.

    ``beta`` is either (b1, b2), giving alpha_i = b1*x_i + b2*y_i, or
    (a0, bE, bN), giving alpha_i = a0 + bE*x_i + bN*y_i.
    """
    if sites.k != 2:
        raise ValueError(f"slant field requires planar sites (k=2), got k={sites.k}")
    beta = tuple(float(b) for b in beta)
    x, y = sites.coords[:, 0], sites.coords[:, 1]
    if len(beta) == 2:
        return beta[0] * x + beta[1] * y
    if len(beta) == 3:
        return beta[0] + beta[1] * x + beta[2] * y
    raise ValueError("beta must have 2 (b1, b2) or 3 (a0, bE, bN) coefficients")


def uniform_sites(d: int, seed: int, low: float = -5.0, high: float = 5.0) -> SiteSet:
    """d sites drawn uniformly over the square [low, high]^2."""
    rng = np.random.default_rng(seed)
    return SiteSet(rng.uniform(low, high, size=(d, 2)))


def sites_from_csv(path, centre_offset=(0.0, 0.0)) -> SiteSet:
    """Read sites from a CSV with columns site_id, x, y.

    ``centre_offset`` is subtracted from every coordinate; the centring
    convention (mean of grid vs a named origin) is left to the caller.
    """
    ids, coords = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ids.append(row["site_id"])
            coords.append((float(row["x"]), float(row["y"])))
    if not coords:
        raise ValueError(f"no sites found in {path}")
    coords = np.asarray(coords) - np.asarray(centre_offset, dtype=float)
    return SiteSet(coords, tuple(ids))
