"""The non-central extended skew-t distribution.

A d-dimensional random vector Y follows this law, with location mu, scale
matrix Omega, slant alpha, extension tau, non-centrality kappa and nu
degrees of freedom, when its density is a multivariate t density tilted by
a univariate non-central t cdf factor.  The family closes under
marginalization, and its cdf is a ratio of a (d+1)-dimensional non-central
t cdf to a univariate one, which is what makes quasi-Monte Carlo
evaluation practical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from .qmc_cdf import (
    CdfResult,
    QmcConfig,
    mvt_cdf,
    mvt_cdf_many,
    mvt_cdf_quad,
    univariate_t_cdf,
)
from .spatial import PositiveDefiniteError

__all__ = [
    "ExtSkewTParams",
    "MPlusVector",
    "SamplingError",
    "nc_ext_skew_t_pdf",
    "nc_ext_skew_t_cdf",
    "nc_ext_skew_t_cdf_many",
    "marginal_slant_extension",
    "m_plus",
    "log_m_plus",
    "sample_nc_ext_skew_t",
]

_PSD_TOL = 1e-10
_REJECTION_CAP = 10**6


class SamplingError(RuntimeError):
    """The rejection sampler exceeded its proposal budget."""


@dataclass(frozen=True)
class ExtSkewTParams:
    """Parameters (mu, Omega, alpha, tau, kappa, nu) of the distribution.

    Omega must be symmetric positive semi-definite; a semi-definite scale
    (a zero row/column) is allowed because the angular law used in exact
    simulation is degenerate at the conditioning site.  Density and cdf
    evaluation additionally require strict positive definiteness.
    """

    mu: np.ndarray
    Omega: np.ndarray
    alpha: np.ndarray
    tau: float
    kappa: float
    nu: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        Omega = np.atleast_2d(np.asarray(self.Omega, dtype=float))
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        d = mu.size
        if Omega.shape != (d, d) or alpha.size != d:
            raise ValueError("mu, Omega, alpha dimensions are inconsistent")
        if not np.allclose(Omega, Omega.T):
            raise ValueError("Omega must be symmetric")
        if np.linalg.eigvalsh(Omega).min() < -_PSD_TOL * max(1.0, np.abs(Omega).max()):
            raise PositiveDefiniteError("Omega must be positive semi-definite")
        if not self.nu > 0:
            raise ValueError("degrees of freedom nu must be positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "Omega", Omega)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "nu", float(self.nu))

    @property
    def dim(self) -> int:
        return self.mu.size

    @property
    def omega(self) -> np.ndarray:
        """Scale standard deviations; zeros (degenerate axes) map to 1 so
        the normalized matrix stays well defined."""
        w = np.sqrt(np.diag(self.Omega))
        return np.where(w > 0, w, 1.0)

    @property
    def omega_bar(self) -> np.ndarray:
        w = self.omega
        return self.Omega / np.outer(w, w)

    @property
    def q_alpha(self) -> float:
        """alpha' Omega_bar alpha, the slant norm in the cdf construction."""
        return float(self.alpha @ self.omega_bar @ self.alpha)

    @property
    def tau_bar(self) -> float:
        return self.tau / np.sqrt(1.0 + self.q_alpha)

    @property
    def kappa_bar(self) -> float:
        return self.kappa / np.sqrt(1.0 + self.q_alpha)


@dataclass(frozen=True)
class MPlusVector:
    """Per-site positive normalizers (the nu-th positive moment of the
    spectral field), stored with their logs for stable downstream use."""

    values: np.ndarray
    log_values: np.ndarray

    def __post_init__(self):
        values = np.atleast_1d(np.asarray(self.values, dtype=float))
        logs = np.atleast_1d(np.asarray(self.log_values, dtype=float))
        if not (np.all(np.isfinite(values)) and np.all(values > 0)):
            raise ValueError("m_plus values must be positive and finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "log_values", logs)


def _log_ndtr(x: float) -> float:
    return float(special.log_ndtr(x))


def _log_t_cdf(x: float, kappa: float, nu: float) -> float:
    p = univariate_t_cdf(x, kappa, nu)
    return float(np.log(max(p, 1e-300)))


def _mvt_logpdf(y, mu, Omega, nu) -> float:
    d = mu.size
    try:
        chol = np.linalg.cholesky(Omega)
    except np.linalg.LinAlgError as exc:
        raise PositiveDefiniteError("Omega must be positive definite") from exc
    w = np.linalg.solve(chol, y - mu)
    quad = float(w @ w)
    logdet = 2.0 * np.log(np.diag(chol)).sum()
    return float(
        special.gammaln((nu + d) / 2)
        - special.gammaln(nu / 2)
        - 0.5 * d * np.log(nu * np.pi)
        - 0.5 * logdet
        - 0.5 * (nu + d) * np.log1p(quad / nu)
    )


def nc_ext_skew_t_pdf(y, p: ExtSkewTParams) -> float:
    """Log density at a point y in R^d."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d = p.dim
    base = _mvt_logpdf(y, p.mu, p.Omega, p.nu)
    z = (y - p.mu) / p.omega
    quad = float(z @ np.linalg.solve(p.omega_bar, z))
    arg = (float(p.alpha @ z) + p.tau) * np.sqrt((p.nu + d) / (p.nu + quad))
    log_tilt = _log_t_cdf(arg, p.kappa, p.nu + d)
    log_norm = _log_t_cdf(p.tau_bar, p.kappa_bar, p.nu)
    return base + log_tilt - log_norm


def _cdf_exact_1d(x: float, p: ExtSkewTParams) -> CdfResult:
    # adaptive quadrature of the exact univariate density
    val, err = integrate.quad(
        lambda t: np.exp(nc_ext_skew_t_pdf(np.array([t]), p)),
        -np.inf,
        float(x),
        limit=200,
    )
    val = min(max(val, 1e-300), 1.0)
    return CdfResult(float(np.log(val)), float(err), 0, True)


def nc_ext_skew_t_cdf(y, p: ExtSkewTParams, cfg: QmcConfig, method: str = "auto") -> CdfResult:
    """Log of P(Y <= y).

    The value is a ratio of a (d+1)-dimensional non-central t cdf (the
    extra coordinate carries the extension) to a univariate one.  With
    ``method="exact"`` (or automatically for d=1) the univariate case is
    computed by adaptive quadrature instead of QMC.
    """
    if method not in ("auto", "exact", "qmc", "quad"):
        raise ValueError(f"unknown method {method!r}")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    d = p.dim
    if y.size != d:
        raise ValueError("y has the wrong dimension")
    z = (y - p.mu) / p.omega
    if not np.any(p.alpha) and p.tau == 0.0 and p.kappa == 0.0:
        # slant-free reduction: plain multivariate t
        if d == 1 and method != "qmc":
            val = univariate_t_cdf(float(z[0]), 0.0, p.nu)
            return CdfResult(float(np.log(max(val, 1e-300))), 0.0, 0, True)
        if method == "quad":
            return mvt_cdf_quad(z, p.omega_bar, np.zeros(d), p.nu)
        return mvt_cdf(z, p.omega_bar, np.zeros(d), p.nu, cfg)
    if method == "exact" or (method in ("auto", "quad") and d == 1):
        if d != 1:
            raise ValueError("exact cdf evaluation is only available for d=1")
        return _cdf_exact_1d(float(y[0]), p)
    root = np.sqrt(1.0 + p.q_alpha)
    delta = (p.omega_bar @ p.alpha) / root
    tau_bar, kappa_bar = p.tau / root, p.kappa / root
    if __debug__:
        # the cdf denominator and the pdf normalizer are the same number
        assert np.isclose(tau_bar, p.tau_bar) and np.isclose(kappa_bar, p.kappa_bar)
    star = np.empty((d + 1, d + 1))
    star[:d, :d] = p.omega_bar
    star[:d, d] = -delta
    star[d, :d] = -delta
    star[d, d] = 1.0
    upper = np.append(z, tau_bar)
    noncent = np.append(np.zeros(d), kappa_bar)
    if method == "quad":
        num = mvt_cdf_quad(upper, star, noncent, p.nu)
    else:
        num = mvt_cdf(upper, star, noncent, p.nu, cfg)
    log_den = _log_t_cdf(tau_bar, kappa_bar, p.nu)
    return CdfResult(
        log_value=min(num.log_value - log_den, 0.0),
        err_estimate=num.err_estimate,
        points_used=num.points_used,
        converged=num.converged,
    )


def nc_ext_skew_t_cdf_many(z_rows, omega_bar, alpha, tau_rows, kappa: float,
                           nu: float, cfg: QmcConfig) -> list:
    """Log cdf at many standardized points sharing all shape parameters.

    ``z_rows`` holds one standardized point (zero location, unit scales)
    per row; ``tau_rows`` may vary by row because the extension depends on
    the conditioning values, while slant, non-centrality and degrees of
    freedom are shared.  The rows are folded into a single batched QMC
    integral, which is what makes likelihood evaluation over a dataset
    tractable.  Returns one ``CdfResult`` per row.
    """
    z_rows = np.atleast_2d(np.asarray(z_rows, dtype=float))
    n_rows, d = z_rows.shape
    omega_bar = np.atleast_2d(np.asarray(omega_bar, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    tau_rows = np.broadcast_to(np.asarray(tau_rows, dtype=float), (n_rows,))
    if not np.any(alpha) and kappa == 0.0 and not np.any(tau_rows):
        return mvt_cdf_many(z_rows, omega_bar, np.zeros(d), nu, cfg)
    q_alpha = float(alpha @ omega_bar @ alpha)
    root = np.sqrt(1.0 + q_alpha)
    delta = (omega_bar @ alpha) / root
    tau_bar = tau_rows / root
    kappa_bar = kappa / root
    star = np.empty((d + 1, d + 1))
    star[:d, :d] = omega_bar
    star[:d, d] = -delta
    star[d, :d] = -delta
    star[d, d] = 1.0
    uppers = np.column_stack([z_rows, tau_bar])
    noncent = np.append(np.zeros(d), kappa_bar)
    nums = mvt_cdf_many(uppers, star, noncent, nu, cfg)
    if kappa_bar == 0.0:
        log_dens = np.log(np.maximum(special.stdtr(nu, tau_bar), 1e-300))
    else:
        log_dens = np.log(np.maximum(stats.nct.cdf(tau_bar, nu, kappa_bar), 1e-300))
    return [
        CdfResult(
            log_value=min(num.log_value - float(ld), 0.0),
            err_estimate=num.err_estimate,
            points_used=num.points_used,
            converged=num.converged,
        )
        for num, ld in zip(nums, log_dens)
    ]


def marginal_slant_extension(Omega_bar, alpha, tau: float, keep):
    """Slant and extension of the marginal law of the kept block.

    Dropping block t from a d-dimensional skew field with correlation
    Omega_bar leaves the kept block s with slant
    (alpha_s + Omega_s^{-1} Omega_{st} alpha_t) / sqrt(1 + alpha_t' S alpha_t)
    where S is the Schur complement of the kept block, and extension tau
    scaled by the same denominator.
    """
    Omega_bar = np.atleast_2d(np.asarray(Omega_bar, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    d = alpha.size
    keep = sorted(int(i) for i in keep)
    if not keep:
        raise ValueError("keep must be nonempty")
    drop = [i for i in range(d) if i not in keep]
    if not drop:
        return alpha.copy(), float(tau)
    O_s = Omega_bar[np.ix_(keep, keep)]
    O_st = Omega_bar[np.ix_(keep, drop)]
    O_t = Omega_bar[np.ix_(drop, drop)]
    a_s, a_t = alpha[keep], alpha[drop]
    try:
        solve_st = np.linalg.solve(O_s, O_st)
    except np.linalg.LinAlgError as exc:
        raise PositiveDefiniteError("kept correlation block is singular") from exc
    schur = O_t - O_st.T @ solve_st
    denom = np.sqrt(1.0 + float(a_t @ schur @ a_t))
    alpha_star = (a_s + solve_st @ a_t) / denom
    return alpha_star, float(tau) / denom


def log_m_plus(Omega_bar, alpha, tau: float, nu: float) -> np.ndarray:
    """Log of the per-site normalizers m_{j+}.

    m_{j+} is the nu-th positive moment of the j-th margin of the skew
    field; the closed form involves only the marginal slant/extension at
    site j and a shared denominator.
    """
    Omega_bar = np.atleast_2d(np.asarray(Omega_bar, dtype=float))
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if not nu > 0:
        raise ValueError("degrees of freedom nu must be positive")
    d = alpha.size
    base = 0.5 * (nu - 2) * np.log(2.0) + special.gammaln((nu + 1) / 2) - 0.5 * np.log(np.pi)
    if not np.any(alpha) and tau == 0.0:
        return np.full(d, base)
    q = float(alpha @ Omega_bar @ alpha)
    log_den = _log_ndtr(tau / np.sqrt(1.0 + q))
    out = np.empty(d)
    for j in range(d):
        a_j, t_j = marginal_slant_extension(Omega_bar, alpha, tau, [j])
        num = _log_t_cdf(float(a_j[0]) * np.sqrt(nu + 1), -t_j, nu + 1)
        out[j] = base + num - log_den
    return out


def m_plus(Omega_bar, alpha, tau: float, nu: float) -> MPlusVector:
    logs = log_m_plus(Omega_bar, alpha, tau, nu)
    return MPlusVector(values=np.exp(logs), log_values=logs)


def sample_nc_ext_skew_t(p: ExtSkewTParams, n: int, rng) -> np.ndarray:
    """n independent draws, shape (n, dim).

    Rejection sampling on the stochastic representation: a multivariate t
    proposal (scale shared with the acceptance variate through one
    chi-squared draw per proposal) is accepted when a standard normal,
    shifted by the non-centrality, falls below the slanted projection.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    d = p.dim
    eigval, eigvec = np.linalg.eigh(p.omega_bar)
    factor = eigvec * np.sqrt(np.clip(eigval, 0.0, None))
    out = np.empty((n, d))
    got, spent = 0, 0
    batch = max(4 * n, 256)
    while got < n:
        if spent > _REJECTION_CAP * n:
            raise SamplingError("rejection sampler exceeded its proposal cap")
        w = rng.chisquare(p.nu, size=batch)
        x = rng.standard_normal((batch, d))
        z0 = rng.standard_normal(batch)
        scale = np.sqrt(p.nu / w)
        t = (x @ factor.T) * scale[:, None]
        accept = (z0 + p.kappa) * scale < t @ p.alpha + p.tau
        spent += batch
        take = t[accept][: n - got]
        out[got : got + take.shape[0]] = p.mu + p.omega * take
        got += take.shape[0]
    return out
