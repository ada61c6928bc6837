"""Exact simulation of extremal-t and extremal skew-t max-stable processes.

Each replicate is built site by site from the spectral decomposition of
the process: at the anchor site a decreasing sequence of Poisson points
is thinned against the maxima already fixed at earlier sites.  The
record index of the point that set each site's maximum is returned as a
hitting label, so the simulated partition of sites into storms comes for
free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exponent import ExponentContext, ModelSpec
from .skewt import ExtSkewTParams, SamplingError
from .spatial import SiteSet, build_correlation_matrix

__all__ = [
    "SimOutput",
    "p_s0_params",
    "simulate_extremal_t",
    "simulate_extremal_skew_t",
    "labels_to_partition",
]

_LOOP_CAP = 10**6


@dataclass(frozen=True)
class SimOutput:
    """N replicates of the process at d sites plus their hitting labels."""

    Z: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        H = np.asarray(self.H)
        if Z.shape != H.shape or Z.ndim != 2:
            raise ValueError("Z and H must be matrices of equal shape")
        if not (np.all(np.isfinite(Z)) and np.all(Z > 0)):
            raise ValueError("Z must be finite and positive")
        if not np.all(H >= 1):
            raise ValueError("hitting labels must be positive integers")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "H", H.astype(np.int64))


def p_s0_params(s0: int, sites: SiteSet, model: ModelSpec) -> ExtSkewTParams:
    """Law of the spectral function anchored at site s0 (value 1 there).

    The scale matrix has an exactly zero row and column at s0; samples
    therefore always equal 1 at the anchor coordinate.
    """
    corr = build_correlation_matrix(sites, model.corr).values
    alpha = model.slant_vector(sites)
    nu_d = model.nu + 1.0
    col = corr[:, s0].copy()
    sigma_hat = (corr - np.outer(col, col)) / nu_d
    sigma_hat[s0, :] = 0.0
    sigma_hat[:, s0] = 0.0
    omega_hat = np.sqrt(np.diag(sigma_hat))
    return ExtSkewTParams(
        mu=col,
        Omega=sigma_hat,
        alpha=np.sqrt(nu_d) * omega_hat * alpha,
        tau=np.sqrt(nu_d) * float(col @ alpha),
        kappa=-model.tau,
        nu=nu_d,
    )


@dataclass
class _SpectralSiteContext:
    # per-site state computed once per simulation call
    params: ExtSkewTParams
    factor: np.ndarray  # eigen square root of the standardized scale
    skewed: bool

    @classmethod
    def build(cls, s0: int, sites: SiteSet, model: ModelSpec) -> "_SpectralSiteContext":
        p = p_s0_params(s0, sites, model)
        eigval, eigvec = np.linalg.eigh(p.omega_bar)
        factor = eigvec * np.sqrt(np.clip(eigval, 0.0, None))
        skewed = bool(np.any(p.alpha)) or p.tau != 0.0 or p.kappa != 0.0
        return cls(params=p, factor=factor, skewed=skewed)

    def draw(self, rng) -> np.ndarray:
        p = self.params
        for _ in range(_LOOP_CAP):
            w = rng.chisquare(p.nu)
            x = rng.standard_normal(p.dim)
            scale = np.sqrt(p.nu / w)
            t = scale * (self.factor @ x)
            if not self.skewed:
                return p.mu + p.omega * t
            z0 = rng.standard_normal()
            # acceptance variate shares the chi-squared draw with the proposal
            if (z0 + p.kappa) * scale < float(t @ p.alpha) + p.tau:
                return p.mu + p.omega * t
        raise SamplingError("spectral rejection sampler exceeded its proposal cap")


def _simulate(sites: SiteSet, model: ModelSpec, N: int, seed: int) -> SimOutput:
    if N < 1:
        raise ValueError("need N >= 1 replicates")
    d = sites.d
    log_mp = ExponentContext.from_model(model, sites).log_mplus
    nu = model.nu
    Z = np.full((N, d), -np.inf)
    H = np.zeros((N, d), dtype=np.int64)
    V = np.zeros(N, dtype=np.int64)
    for j in range(d):
        ctx = _SpectralSiteContext.build(j, sites, model)
        for i in range(N):
            rng = np.random.default_rng(np.random.SeedSequence([seed, j, i]))
            E = rng.exponential()
            Et = np.exp(-(np.log(E) - log_mp[j]) / nu)
            iters = 0
            while Et > Z[i, j]:
                iters += 1
                if iters > _LOOP_CAP:
                    raise SamplingError("Poisson point loop exceeded its cap")
                V[i] += 1
                cand = ctx.draw(rng) * Et
                if not np.any(cand[:j] > Z[i, :j]):
                    upd = cand[j:] > Z[i, j:]
                    Z[i, j:][upd] = cand[j:][upd]
                    H[i, j:][upd] = V[i]
                E += rng.exponential()
                Et = np.exp(-(np.log(E) - log_mp[j]) / nu)
    # back to unit Frechet margins, on the log scale
    Z_final = np.exp(nu * np.log(Z) - log_mp)
    return SimOutput(Z=Z_final, H=H)


def simulate_extremal_t(sites: SiteSet, model: ModelSpec, N: int, seed: int) -> SimOutput:
    """N exact replicates of the extremal-t process at the sites."""
    if model.family != "extremal-t":
        raise ValueError("model.family must be 'extremal-t'")
    return _simulate(sites, model, N, seed)


def simulate_extremal_skew_t(sites: SiteSet, model: ModelSpec, N: int, seed: int) -> SimOutput:
    """N exact replicates of the extremal skew-t process at the sites."""
    if model.family != "extremal-skew-t":
        raise ValueError("model.family must be 'extremal-skew-t'")
    return _simulate(sites, model, N, seed)


def labels_to_partition(H_row):
    """Group sites that share a hitting label into a partition of 1..d."""
    from .likelihood import HittingScenario

    labels = np.asarray(H_row)
    if labels.ndim != 1 or np.any(labels < 1):
        raise ValueError("H_row must be a vector of positive labels")
    groups: dict[int, list[int]] = {}
    for site, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(site)
    blocks = sorted(groups.values(), key=lambda b: b[0])
    return HittingScenario(blocks=tuple(tuple(b) for b in blocks))
