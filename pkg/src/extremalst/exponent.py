"""Exponent function of the extremal-t and extremal skew-t processes.

The joint law of the process at d sites is exp(-V(z)).  V is a sum of
(d-1)-dimensional extended skew-t cdfs; its partial derivatives factor
into a closed-form marginal term and one (d-m)-dimensional cdf.  The
intensity of the underlying point process and the conditional intensity
given observed coordinates both fall out of the same factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .qmc_cdf import (
    CdfResult,
    QmcConfig,
    mvt_cdf,
    mvt_cdf_many,
    mvt_cdf_quad,
    univariate_t_cdf,
)
from .skewt import (
    ExtSkewTParams,
    log_m_plus,
    marginal_slant_extension,
    nc_ext_skew_t_cdf,
    nc_ext_skew_t_cdf_many,
)
from .spatial import (
    CorrelationConfig,
    PositiveDefiniteError,
    SiteSet,
    build_correlation_matrix,
    slant_field,
)

__all__ = [
    "ModelSpec",
    "CondParams",
    "ExponentContext",
    "ExponentResult",
    "exponent_V",
    "exponent_partial",
    "conditional_params",
    "intensity",
    "conditional_intensity",
]

FAMILIES = ("extremal-t", "extremal-skew-t")


@dataclass(frozen=True)
class ModelSpec:
    """Dependence model: family, correlation, slant surface, extension, dof."""

    family: str
    corr: CorrelationConfig
    slant_coeffs: tuple = ()
    tau: float = 0.0
    nu: float = 1.0
    nu_fixed: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        coeffs = tuple(float(c) for c in self.slant_coeffs)
        object.__setattr__(self, "slant_coeffs", coeffs)
        if self.family == "extremal-t" and (any(coeffs) or self.tau != 0.0):
            raise ValueError("extremal-t requires zero slant and zero extension")
        if not self.nu > 0:
            raise ValueError("degrees of freedom nu must be positive")

    def slant_vector(self, sites: SiteSet) -> np.ndarray:
        if self.family == "extremal-t" or not self.slant_coeffs:
            return np.zeros(sites.d)
        return slant_field(sites, self.slant_coeffs)


@dataclass(frozen=True)
class CondParams:
    """Extended skew-t parameters of the process at sites t given exact
    observations at sites s."""

    mu_c: np.ndarray
    Omega_c: np.ndarray
    alpha_c: np.ndarray
    tau_c: float
    kappa_c: float
    nu_c: float

    def as_skewt(self) -> ExtSkewTParams:
        return ExtSkewTParams(
            mu=self.mu_c,
            Omega=self.Omega_c,
            alpha=self.alpha_c,
            tau=self.tau_c,
            kappa=self.kappa_c,
            nu=self.nu_c,
        )


@dataclass(frozen=True)
class ExponentResult:
    """A scalar (V or log of a partial derivative) with the accumulated
    cdf-approximation error and convergence status."""

    value: float
    err_estimate: float
    converged: bool

    def __float__(self) -> float:
        return self.value


def _log_t_cdf(x: float, kappa: float, nu: float) -> float:
    return float(np.log(max(univariate_t_cdf(x, kappa, nu), 1e-300)))


class ExponentContext:
    """Cached per-(model, sites) state: the correlation matrix, the slant
    vector and the log normalizers, reused across likelihood evaluations."""

    def __init__(self, omega_bar: np.ndarray, alpha: np.ndarray, tau: float, nu: float):
        omega_bar = np.atleast_2d(np.asarray(omega_bar, dtype=float))
        self.omega_bar = omega_bar
        self.alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        self.tau = float(tau)
        self.nu = float(nu)
        self.d = omega_bar.shape[0]
        try:
            np.linalg.cholesky(omega_bar)
        except np.linalg.LinAlgError as exc:
            raise PositiveDefiniteError("correlation matrix is not positive definite") from exc
        self.is_skew = bool(np.any(self.alpha)) or self.tau != 0.0
        self.log_mplus = log_m_plus(omega_bar, self.alpha, self.tau, self.nu)
        self._sum_terms = None

    @classmethod
    def from_model(cls, model: ModelSpec, sites: SiteSet) -> "ExponentContext":
        corr = build_correlation_matrix(sites, model.corr)
        return cls(corr.values, model.slant_vector(sites), model.tau, model.nu)

    def subset(self, idx) -> "ExponentContext":
        """Context of the process restricted to a subset of sites.

        The restricted field has the marginal slant/extension of the kept
        block; the per-site normalizers are unchanged by marginalization.
        """
        idx = sorted(int(i) for i in idx)
        alpha_k, tau_k = marginal_slant_extension(self.omega_bar, self.alpha, self.tau, idx)
        sub = ExponentContext(self.omega_bar[np.ix_(idx, idx)], alpha_k, tau_k, self.nu)
        sub.log_mplus = self.log_mplus[idx]
        return sub

    def _z_circ(self, z: np.ndarray, idx=None) -> np.ndarray:
        logs = self.log_mplus if idx is None else self.log_mplus[idx]
        return np.exp((np.log(z) + logs) / self.nu)

    def _term_params(self, i: int):
        """Parameters of the i-th cdf term of V (site i against the rest)."""
        others = [j for j in range(self.d) if j != i]
        rho = self.omega_bar[i, others]
        schur = self.omega_bar[np.ix_(others, others)] - np.outer(rho, rho)
        w = np.sqrt(np.diag(schur))
        corr = schur / np.outer(w, w)
        a_others = self.alpha[others]
        alpha_o = w * a_others
        tau_o = np.sqrt(self.nu + 1) * float(self.omega_bar[i] @ self.alpha)
        return rho, corr, alpha_o, tau_o, -self.tau

    def _terms(self):
        if self._sum_terms is None:
            self._sum_terms = [self._term_params(i) for i in range(self.d)]
        return self._sum_terms

    def V(self, z, cfg: QmcConfig, method: str = "auto") -> ExponentResult:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if z.size != self.d or np.any(z <= 0):
            raise ValueError("z must be a positive vector matching the site count")
        if self.d == 1:
            return ExponentResult(1.0 / float(z[0]), 0.0, True)
        zc = self._z_circ(z)
        nu1 = self.nu + 1
        total, err, ok = 0.0, 0.0, True
        for i, (rho, corr, alpha_o, tau_o, kappa_o) in enumerate(self._terms()):
            others = [j for j in range(self.d) if j != i]
            upper = np.sqrt(nu1 / (1.0 - rho**2)) * (zc[others] / zc[i] - rho)
            if not self.is_skew:
                if upper.size == 1 and method != "qmc":
                    res = CdfResult(_log_t_cdf(float(upper[0]), 0.0, nu1), 0.0, 0, True)
                elif method == "exact":
                    raise ValueError("exact evaluation needs dimension <= 2")
                elif method == "quad":
                    res = mvt_cdf_quad(upper, corr, np.zeros(upper.size), nu1)
                else:
                    res = mvt_cdf(upper, corr, np.zeros(upper.size), nu1, cfg)
            else:
                p = ExtSkewTParams(
                    mu=np.zeros(upper.size), Omega=corr, alpha=alpha_o,
                    tau=tau_o, kappa=kappa_o, nu=nu1,
                )
                res = nc_ext_skew_t_cdf(upper, p, cfg, method=method)
            total += np.exp(res.log_value) / z[i]
            err += res.err_estimate / z[i]
            ok = ok and res.converged
        return ExponentResult(float(total), float(err), ok)

    def V_many(self, Z, cfg: QmcConfig) -> list:
        """V at every row of Z in one batched QMC pass per cdf term.

        Equivalent to row-wise ``V`` calls up to the cdf error estimate;
        this is the path the likelihoods use, since a dataset evaluates
        the same d cdf terms at every row.
        """
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[1] != self.d or np.any(Z <= 0):
            raise ValueError("Z rows must be positive vectors matching the site count")
        n_rows = Z.shape[0]
        if self.d == 1:
            return [ExponentResult(1.0 / float(z), 0.0, True) for z in Z[:, 0]]
        Zc = np.exp((np.log(Z) + self.log_mplus) / self.nu)
        nu1 = self.nu + 1
        totals = np.zeros(n_rows)
        errs = np.zeros(n_rows)
        ok = np.ones(n_rows, dtype=bool)
        for i, (rho, corr, alpha_o, tau_o, kappa_o) in enumerate(self._terms()):
            others = [j for j in range(self.d) if j != i]
            uppers = np.sqrt(nu1 / (1.0 - rho**2)) * (Zc[:, others] / Zc[:, [i]] - rho)
            if not self.is_skew:
                results = mvt_cdf_many(uppers, corr, np.zeros(self.d - 1), nu1, cfg)
            else:
                results = nc_ext_skew_t_cdf_many(
                    uppers, corr, alpha_o, tau_o, kappa_o, nu1, cfg
                )
            for r, res in enumerate(results):
                totals[r] += np.exp(res.log_value) / Z[r, i]
                errs[r] += res.err_estimate / Z[r, i]
                ok[r] &= res.converged
        return [
            ExponentResult(float(v), float(e), bool(c))
            for v, e, c in zip(totals, errs, ok)
        ]

    def partial_many(self, Z, block, cfg: QmcConfig) -> list:
        """log(-dV/dz_block) at every row of Z in one batched QMC pass.

        Equivalent to row-wise ``partial`` calls up to the cdf error
        estimate (the skew conditional case always takes the QMC route,
        including in one dimension where ``partial`` integrates exactly).
        """
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        s = sorted(int(i) for i in block)
        if not s or len(set(s)) != len(s) or s[0] < 0 or s[-1] >= self.d:
            raise ValueError("block must be a nonempty set of valid site indices")
        if Z.shape[1] != self.d or np.any(Z <= 0):
            raise ValueError("Z rows must be positive vectors matching the site count")
        t = [j for j in range(self.d) if j not in s]
        m, nu = len(s), self.nu
        Zc_s = np.exp((np.log(Z[:, s]) + self.log_mplus[s]) / nu)
        O_s = self.omega_bar[np.ix_(s, s)]
        try:
            chol = np.linalg.cholesky(O_s)
        except np.linalg.LinAlgError as exc:
            raise PositiveDefiniteError("block correlation is not positive definite") from exc
        q_z = np.sum(np.linalg.solve(chol, Zc_s.T) ** 2, axis=0)
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        a_star, t_star = marginal_slant_extension(self.omega_bar, self.alpha, self.tau, s)
        a_tilde = (Zc_s @ a_star) / np.sqrt(q_z)
        q_a = float(a_star @ O_s @ a_star)
        arg = a_tilde * np.sqrt(m + nu)
        if t_star == 0.0:
            tilt = special.stdtr(m + nu, arg)
        else:
            tilt = stats.nct.cdf(arg, m + nu, -t_star)
        log_factor = (
            0.5 * (nu - 2) * np.log(2.0)
            + (1 - m) * np.log(nu)
            + special.gammaln((m + nu) / 2)
            + np.log(np.maximum(tilt, 1e-300))
            + np.sum(self.log_mplus[s] + (1 - nu) * np.log(Z[:, s]), axis=1) / nu
            - 0.5 * m * np.log(np.pi)
            - 0.5 * logdet
            - 0.5 * (m + nu) * np.log(q_z)
            - float(special.log_ndtr(t_star / np.sqrt(1.0 + q_a)))
        )
        if not t:
            return [ExponentResult(float(lf), 0.0, True) for lf in log_factor]
        O_st = self.omega_bar[np.ix_(s, t)]
        solve_st = np.linalg.solve(O_s, O_st)
        schur = self.omega_bar[np.ix_(t, t)] - O_st.T @ solve_st
        w = np.sqrt(np.diag(schur))
        corr_c = schur / np.outer(w, w)
        nu_c = nu + m
        mu_rows = np.linalg.solve(O_s, Zc_s.T).T @ O_st
        Zc_t = np.exp((np.log(Z[:, t]) + self.log_mplus[t]) / nu)
        z_std = (Zc_t - mu_rows) / (np.sqrt(q_z / nu_c)[:, None] * w)
        if not self.is_skew:
            results = mvt_cdf_many(z_std, corr_c, np.zeros(len(t)), nu_c, cfg)
        else:
            a_s, a_t = self.alpha[s], self.alpha[t]
            tau_rows = (Zc_s @ (a_s + solve_st @ a_t)) * np.sqrt(nu_c / q_z)
            results = nc_ext_skew_t_cdf_many(
                z_std, corr_c, w * a_t, tau_rows, -self.tau, nu_c, cfg
            )
        return [
            ExponentResult(float(lf) + res.log_value, res.err_estimate, res.converged)
            for lf, res in zip(log_factor, results)
        ]

    def conditional(self, s_idx, z_circ_s: np.ndarray) -> CondParams:
        """Law of the remaining sites given transformed values at s_idx."""
        s = list(s_idx)
        t = [j for j in range(self.d) if j not in s]
        O_s = self.omega_bar[np.ix_(s, s)]
        O_st = self.omega_bar[np.ix_(s, t)]
        O_t = self.omega_bar[np.ix_(t, t)]
        solve_v = np.linalg.solve(O_s, z_circ_s)
        solve_st = np.linalg.solve(O_s, O_st)
        q_z = float(z_circ_s @ solve_v)
        nu_c = self.nu + len(s)
        schur = O_t - O_st.T @ solve_st
        w = np.sqrt(np.diag(schur))
        a_s, a_t = self.alpha[s], self.alpha[t]
        tau_c = float((a_s + solve_st @ a_t) @ z_circ_s) * np.sqrt(nu_c / q_z)
        return CondParams(
            mu_c=O_st.T @ solve_v,
            Omega_c=(q_z / nu_c) * schur,
            alpha_c=w * a_t,
            tau_c=tau_c,
            kappa_c=-self.tau,
            nu_c=nu_c,
        )

    def partial(self, z, block, cfg: QmcConfig, method: str = "auto") -> ExponentResult:
        """log(-dV/dz_block), the mixed partial over the block's coordinates."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        s = sorted(int(i) for i in block)
        if not s or len(set(s)) != len(s) or s[0] < 0 or s[-1] >= self.d:
            raise ValueError("block must be a nonempty set of valid site indices")
        if z.size != self.d or np.any(z <= 0):
            raise ValueError("z must be a positive vector matching the site count")
        t = [j for j in range(self.d) if j not in s]
        m, nu = len(s), self.nu
        zc_s = self._z_circ(z[s], s)
        O_s = self.omega_bar[np.ix_(s, s)]
        try:
            chol = np.linalg.cholesky(O_s)
        except np.linalg.LinAlgError as exc:
            raise PositiveDefiniteError("block correlation is not positive definite") from exc
        q_z = float(np.sum(np.linalg.solve(chol, zc_s) ** 2))
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        a_star, t_star = marginal_slant_extension(self.omega_bar, self.alpha, self.tau, s)
        a_tilde = float(a_star @ zc_s) / np.sqrt(q_z)
        q_a = float(a_star @ O_s @ a_star)
        log_factor = (
            0.5 * (nu - 2) * np.log(2.0)
            + (1 - m) * np.log(nu)
            + special.gammaln((m + nu) / 2)
            + _log_t_cdf(a_tilde * np.sqrt(m + nu), -t_star, m + nu)
            + float(np.sum(self.log_mplus[s] + (1 - nu) * np.log(z[s]))) / nu
            - 0.5 * m * np.log(np.pi)
            - 0.5 * logdet
            - 0.5 * (m + nu) * np.log(q_z)
            - float(special.log_ndtr(t_star / np.sqrt(1.0 + q_a)))
        )
        if not t:
            return ExponentResult(log_factor, 0.0, True)
        cond = self.conditional(s, zc_s)
        zc_t = self._z_circ(z[t], t)
        if not self.is_skew:
            w_c = np.sqrt(np.diag(cond.Omega_c))
            upper = (zc_t - cond.mu_c) / w_c
            corr = cond.Omega_c / np.outer(w_c, w_c)
            if upper.size == 1 and method != "qmc":
                res = CdfResult(_log_t_cdf(float(upper[0]), 0.0, cond.nu_c), 0.0, 0, True)
            elif method == "exact":
                raise ValueError("exact evaluation needs a conditional dimension <= 1")
            elif method == "quad":
                res = mvt_cdf_quad(upper, corr, np.zeros(upper.size), cond.nu_c)
            else:
                res = mvt_cdf(upper, corr, np.zeros(upper.size), cond.nu_c, cfg)
        else:
            res = nc_ext_skew_t_cdf(zc_t, cond.as_skewt(), cfg, method=method)
        return ExponentResult(log_factor + res.log_value, res.err_estimate, res.converged)


def exponent_V(z, model: ModelSpec, sites: SiteSet, cfg: QmcConfig,
               method: str = "auto") -> ExponentResult:
    """V(z); exp(-V) is the joint cdf of the process at the sites."""
    return ExponentContext.from_model(model, sites).V(z, cfg, method)


def exponent_partial(z, block, model: ModelSpec, sites: SiteSet, cfg: QmcConfig,
                     method: str = "auto") -> ExponentResult:
    """log(-V_block(z)), the log mixed partial derivative over the block."""
    return ExponentContext.from_model(model, sites).partial(z, block, cfg, method)


def conditional_params(t_idx, s_idx, v, model: ModelSpec, sites: SiteSet) -> CondParams:
    """Parameters of the conditional law at sites t given values v at sites s."""
    t_idx, s_idx = list(t_idx), list(s_idx)
    if set(t_idx) & set(s_idx):
        raise ValueError("t_idx and s_idx must be disjoint")
    order = s_idx + t_idx
    ctx = ExponentContext.from_model(model, sites)
    perm = ExponentContext(
        ctx.omega_bar[np.ix_(order, order)], ctx.alpha[order], ctx.tau, ctx.nu
    )
    perm.log_mplus = ctx.log_mplus[order]
    v = np.atleast_1d(np.asarray(v, dtype=float))
    zc_s = perm._z_circ(v, list(range(len(s_idx))))
    return perm.conditional(list(range(len(s_idx))), zc_s)


def intensity(v, model: ModelSpec, sites: SiteSet, cfg: QmcConfig,
              method: str = "auto") -> float:
    """Point process intensity at v; equals -V_{1..d}(v)."""
    ctx = ExponentContext.from_model(model, sites)
    return float(np.exp(ctx.partial(v, range(ctx.d), cfg, method).value))


def conditional_intensity(u, v, t_idx, s_idx, model: ModelSpec, sites: SiteSet,
                          cfg: QmcConfig) -> float:
    """Density at u of the process at sites t given exact values v at sites s."""
    from .skewt import nc_ext_skew_t_pdf

    u = np.atleast_1d(np.asarray(u, dtype=float))
    cond = conditional_params(t_idx, s_idx, v, model, sites)
    ctx = ExponentContext.from_model(model, sites)
    t_idx = list(t_idx)
    m = len(t_idx)
    nu = ctx.nu
    u_circ = np.exp((np.log(u) + ctx.log_mplus[t_idx]) / nu)
    log_jac = -m * np.log(nu) + float(
        np.sum(ctx.log_mplus[t_idx] + (1 - nu) * np.log(u)) / nu
    )
    return float(np.exp(nc_ext_skew_t_pdf(u_circ, cond.as_skewt()) + log_jac))
