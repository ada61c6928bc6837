"""Quasi-Monte Carlo evaluation of multivariate normal and t distribution functions.

The kernel integrates a separation-of-variables transform of the orthant
probability over a randomized quasi-random point set (Richtmyer generating
vector, Cranley-Patterson shifts).  The error estimate is three standard
errors across the random shifts, and may be controlled either on the
natural scale or on the scale of the log probability.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special, stats

from .spatial import CorrelationMatrix, PositiveDefiniteError

__all__ = [
    "QmcConfig",
    "QmcPreset",
    "CdfResult",
    "mvn_cdf",
    "mvt_cdf",
    "mvt_cdf_many",
    "mvt_cdf_quad",
    "univariate_t_cdf",
    "table_preset",
]

_TINY = 1e-300
_UNIT_EPS = 1e-15


@dataclass(frozen=True)
class QmcConfig:
    """Budget and error-control settings for one cdf approximation.

    ``n_min``/``n_max`` bound the number of integration points per shift;
    at least ``n_min`` points are always consumed and iteration stops as
    soon as the estimated error drops below ``epsilon`` (never exceeding
    ``n_max``).  With ``log_scale`` the error of the log value is driven
    below ``epsilon`` instead, so small probabilities need fewer points.
    """

    epsilon: float = 1e-3
    n_min: int = 50
    n_max: int = 500
    shifts: int = 12
    seed: int = 0
    log_scale: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ValueError("require 1 <= n_min <= n_max")
        if self.shifts < 2:
            raise ValueError("need at least 2 shifts for an error estimate")


@dataclass(frozen=True)
class QmcPreset:
    """Budget pair: one config for exponent-function terms, one for the
    (relatively more important) partial-derivative terms."""

    exponent_cfg: QmcConfig
    partial_cfg: QmcConfig


# (n_min, n_max) budgets for (partial-derivative terms, exponent terms),
# keyed by composite-likelihood order; "type-I"/"type-II" are the two
# full-likelihood profiles.
_BUDGETS = {
    2: ((100, 1000), (10, 100)),
    3: ((100, 1000), (10, 100)),
    4: ((50, 500), (5, 50)),
    5: ((50, 500), (5, 50)),
    10: ((20, 200), (2, 20)),
    "type-I": ((50, 500), (5, 50)),
    "type-II": ((20, 200), (2, 20)),
}


def table_preset(kind, epsilon: float = 1e-3, shifts: int = 12, seed: int = 0) -> QmcPreset:
    """Named budget profile: "type-I", "type-II", or a j-wise order."""
    key = kind
    if isinstance(kind, int):
        key = min((k for k in (2, 3, 4, 5, 10) if k >= kind), default=10)
        if kind > 10:
            key = 10
    if key not in _BUDGETS:
        raise ValueError(f"unknown preset {kind!r}")
    (pmin, pmax), (emin, emax) = _BUDGETS[key]
    partial = QmcConfig(epsilon, pmin, pmax, shifts, seed, log_scale=True)
    exponent = QmcConfig(epsilon, emin, emax, shifts, seed, log_scale=False)
    return QmcPreset(exponent_cfg=exponent, partial_cfg=partial)


@dataclass(frozen=True)
class CdfResult:
    """A log probability with its error estimate.

    ``err_estimate`` lives on the scale the config controlled: natural
    scale by default, log scale when the config set ``log_scale``.
    """

    log_value: float
    err_estimate: float
    points_used: int
    converged: bool

    @property
    def value(self) -> float:
        return float(np.exp(self.log_value))


def _first_primes(n: int) -> np.ndarray:
    primes, cand = [], 2
    while len(primes) < n:
        if all(cand % p for p in primes if p * p <= cand):
            primes.append(cand)
        cand += 1
    return np.array(primes, dtype=float)


_PRIMES = _first_primes(160)


@lru_cache(maxsize=128)
def _point_set(dim: int, n_max: int, shifts: int, seed: int) -> np.ndarray:
    """Randomized quasi-random points, shape (shifts, n_max, dim)."""
    gen = np.sqrt(_PRIMES[:dim])
    idx = np.arange(1, n_max + 1, dtype=float)
    base = np.mod(idx[:, None] * gen[None, :], 1.0)  # (n_max, dim)
    rng = np.random.default_rng(np.random.SeedSequence([seed, dim, n_max, shifts]))
    delta = rng.random((shifts, 1, dim))
    pts = np.mod(base[None, :, :] + delta, 1.0)
    pts.setflags(write=False)
    return pts


@lru_cache(maxsize=128)
def _chi_scale(dim: int, n_max: int, shifts: int, seed: int, nu: float) -> np.ndarray:
    """sqrt(chi2_nu / nu) quantiles at the first coordinate of the point set."""
    u = _point_set(dim, n_max, shifts, seed)[:, :, 0]
    u = np.clip(u, _UNIT_EPS, 1 - _UNIT_EPS)
    s = np.sqrt(special.chdtri(nu, 1.0 - u) / nu)
    s.setflags(write=False)
    return s


def _chunk_schedule(n_min: int, n_max: int):
    # double the consumed points per step, but never crawl: tiny chunks
    # cost more in overhead than they save in early stopping
    edges, cur = [0, n_min], n_min
    while cur < n_max:
        cur = min(max(2 * cur, 32), n_max)
        edges.append(cur)
    return list(zip(edges[:-1], edges[1:]))


def _sov_orthant(u: np.ndarray, limits: np.ndarray, chol: np.ndarray) -> np.ndarray:
    """Genz separation-of-variables integrand for P(X <= limits), X ~ N(0, C C^T).

    ``u`` has shape (S, n, d-1); ``limits`` may be (d,) or broadcast
    (S, n, d) when the limits themselves depend on the point (t case).
    """
    d = chol.shape[0]
    if limits.ndim == 1:
        lim = lambda j: limits[j]
        batch = u.shape[:-1]
    else:
        lim = lambda j: limits[..., j]
        batch = np.broadcast_shapes(u.shape[:-1], limits.shape[:-1])
    e = special.ndtr(lim(0) / chol[0, 0])
    prob = np.broadcast_to(e, batch).copy()
    if d == 1:
        return prob
    y = np.empty(batch + (d - 1,))
    for j in range(1, d):
        q = np.minimum(np.maximum(u[..., j - 1] * e, _UNIT_EPS), 1 - _UNIT_EPS)
        y[..., j - 1] = special.ndtri(q)
        resid = lim(j) - y[..., :j] @ chol[j, :j]
        e = special.ndtr(resid / chol[j, j])
        prob *= e
    return prob


def _reorder(upper, shift, corr):
    """Put the most restrictive integration limits first."""
    order = np.argsort(upper - shift)
    return order, upper[order], shift[order], corr[np.ix_(order, order)]


def _run(cfg: QmcConfig, dim: int, evaluate) -> CdfResult:
    """Accumulate chunks of the point set until the error target is met."""
    pts = _point_set(dim, cfg.n_max, cfg.shifts, cfg.seed)
    sums = np.zeros(cfg.shifts)
    count = 0
    value = err = metric = np.inf
    for start, stop in _chunk_schedule(cfg.n_min, cfg.n_max):
        sums += evaluate(pts[:, start:stop, :], start, stop).sum(axis=1)
        count = stop
        means = sums / count
        value = float(means.mean())
        err = 3.0 * float(means.std(ddof=1)) / np.sqrt(cfg.shifts)
        metric = err / max(value, _TINY) if cfg.log_scale else err
        if metric <= cfg.epsilon:
            break
    value = min(max(value, _TINY), 1.0)
    return CdfResult(
        log_value=float(np.log(value)),
        err_estimate=float(err / value if cfg.log_scale else err),
        points_used=count * cfg.shifts,
        converged=bool(metric <= cfg.epsilon),
    )


def _as_matrix(corr) -> np.ndarray:
    if isinstance(corr, CorrelationMatrix):
        return corr.values
    return np.atleast_2d(np.asarray(corr, dtype=float))


def _chol(mat: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise PositiveDefiniteError("cdf scale matrix is not positive definite") from exc


def _strip_infinite(upper, shift, corr):
    """Marginalize +inf limits away; a -inf limit makes the probability 0."""
    if np.any(np.isneginf(upper)):
        return None
    keep = ~np.isposinf(upper)
    if not keep.all():
        idx = np.flatnonzero(keep)
        return upper[idx], shift[idx], corr[np.ix_(idx, idx)]
    return upper, shift, corr


def mvn_cdf(upper, corr, cfg: QmcConfig) -> CdfResult:
    """P(X <= upper) for X ~ N(0, corr), to within cfg.epsilon."""
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    mat = _as_matrix(corr)
    stripped = _strip_infinite(upper, np.zeros_like(upper), mat)
    if stripped is None:
        return CdfResult(np.log(_TINY), 0.0, 0, True)
    upper, _, mat = stripped
    d = upper.size
    if d == 0:
        return CdfResult(0.0, 0.0, 0, True)
    _, upper, _, mat = _reorder(upper, np.zeros_like(upper), mat)
    chol = _chol(mat)
    if d == 1:
        p = float(special.ndtr(upper[0]))
        p = min(max(p, _TINY), 1.0)
        return CdfResult(float(np.log(p)), 0.0, 0, True)

    def evaluate(u, start, stop):
        return _sov_orthant(u, upper, chol)

    return _run(cfg, d - 1, evaluate)


def mvt_cdf(upper, corr, noncentrality, nu: float, cfg: QmcConfig) -> CdfResult:
    """P(T <= upper) for T = (X + noncentrality) / sqrt(chi2_nu / nu), X ~ N(0, corr)."""
    if not nu > 0:
        raise ValueError("degrees of freedom nu must be positive")
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    delta = np.broadcast_to(np.asarray(noncentrality, dtype=float), upper.shape).copy()
    mat = _as_matrix(corr)
    stripped = _strip_infinite(upper, delta, mat)
    if stripped is None:
        return CdfResult(np.log(_TINY), 0.0, 0, True)
    upper, delta, mat = stripped
    d = upper.size
    if d == 0:
        return CdfResult(0.0, 0.0, 0, True)
    _, upper, delta, mat = _reorder(upper, delta, mat)
    chol = _chol(mat)
    dim = d  # one coordinate for the chi scale, d-1 for the normal part
    chi = _chi_scale(dim, cfg.n_max, cfg.shifts, cfg.seed, float(nu))

    def evaluate(u, start, stop):
        s = chi[:, start:stop]
        limits = upper * s[..., None] - delta
        return _sov_orthant(u[..., 1:], limits, chol)

    return _run(cfg, dim, evaluate)


def mvt_cdf_many(uppers, corr, noncentrality, nu: float, cfg: QmcConfig) -> list:
    """One QMC pass over many rows of upper limits sharing a scale matrix.

    Likelihood evaluation calls the same cdf at every data row; folding
    the rows into the integrand batch is far cheaper than row-wise calls.
    All limits must be finite.  The coordinate ordering is chosen once
    from the mean limits, so a row's value can differ from a one-row
    ``mvt_cdf`` call by a fraction of the error estimate.  Returns one
    ``CdfResult`` per row.
    """
    if not nu > 0:
        raise ValueError("degrees of freedom nu must be positive")
    uppers = np.atleast_2d(np.asarray(uppers, dtype=float))
    if not np.all(np.isfinite(uppers)):
        raise ValueError("batched cdf evaluation requires finite limits")
    n_rows, d = uppers.shape
    delta = np.broadcast_to(np.asarray(noncentrality, dtype=float), (d,)).copy()
    mat = _as_matrix(corr)
    if d == 1:
        if delta[0] == 0.0:
            p = special.stdtr(nu, uppers[:, 0])
        else:
            p = stats.nct.cdf(uppers[:, 0], nu, delta[0])
        p = np.clip(p, _TINY, 1.0)
        return [CdfResult(float(np.log(v)), 0.0, 0, True) for v in p]
    order = np.argsort(uppers.mean(axis=0) - delta)
    uppers = uppers[:, order]
    delta = delta[order]
    chol = _chol(mat[np.ix_(order, order)])
    pts = _point_set(d, cfg.n_max, cfg.shifts, cfg.seed)
    chi = _chi_scale(d, cfg.n_max, cfg.shifts, cfg.seed, float(nu))
    sums = np.zeros((n_rows, cfg.shifts))
    final_v = np.empty(n_rows)
    final_e = np.empty(n_rows)
    final_n = np.zeros(n_rows, dtype=int)
    final_c = np.zeros(n_rows, dtype=bool)
    active = np.arange(n_rows)
    schedule = _chunk_schedule(cfg.n_min, cfg.n_max)
    for start, stop in schedule:
        u = pts[:, start:stop, :]
        limits = uppers[active][:, None, None, :] * chi[None, :, start:stop, None] - delta
        sums[active] += _sov_orthant(u[..., 1:], limits, chol).sum(axis=-1)
        means = sums[active] / stop
        values = means.mean(axis=1)
        errs = 3.0 * means.std(axis=1, ddof=1) / np.sqrt(cfg.shifts)
        metrics = errs / np.maximum(values, _TINY) if cfg.log_scale else errs
        # rows at their error target leave the batch; the rest keep going
        hit = metrics <= cfg.epsilon
        done = hit if stop < cfg.n_max else np.ones_like(hit)
        idx = active[done]
        final_v[idx] = values[done]
        final_e[idx] = errs[done]
        final_n[idx] = stop * cfg.shifts
        final_c[idx] = hit[done]
        active = active[~done]
        if active.size == 0:
            break
    out = []
    for r in range(n_rows):
        v = min(max(float(final_v[r]), _TINY), 1.0)
        out.append(CdfResult(
            log_value=float(np.log(v)),
            err_estimate=float(final_e[r] / v if cfg.log_scale else final_e[r]),
            points_used=int(final_n[r]),
            converged=bool(final_c[r]),
        ))
    return out


@lru_cache(maxsize=None)
def _leggauss01(order: int):
    # Gauss-Legendre nodes and weights on the unit interval
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def _bvn_cdf(a, b, rho: float):
    """P(X <= a, Y <= b) for a standard bivariate normal, vectorized in a, b.

    Plackett's identity integrated with the arcsine substitution, so the
    integrand is analytic and a fixed Gauss-Legendre rule is accurate to
    near machine precision.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    base = special.ndtr(a) * special.ndtr(b)
    if rho == 0.0:
        return base
    t, w = _leggauss01(48)
    theta = np.arcsin(rho) * t
    sin_t = np.sin(theta)
    cos2 = np.cos(theta) ** 2
    aa, bb = a[..., None], b[..., None]
    expo = np.exp(-(aa**2 - 2.0 * aa * bb * sin_t + bb**2) / (2.0 * cos2))
    return base + (expo @ w) * (np.arcsin(rho) / (2.0 * np.pi))


def _chi_rule(nu: float, order: int):
    # quadrature for the scale mixture s = sqrt(chi2_nu / nu): nodes and
    # weights absorbing the (truncated, analytic) density of s
    t, w = _leggauss01(order)
    s_lo = np.sqrt(stats.chi2.ppf(1e-14, nu) / nu)
    s_hi = np.sqrt(stats.chi2.isf(1e-14, nu) / nu)
    s = s_lo + t * (s_hi - s_lo)
    log_pdf = stats.chi2.logpdf(nu * s**2, nu) + np.log(2.0 * nu * s)
    return s, w * (s_hi - s_lo) * np.exp(log_pdf)


def mvt_cdf_quad(upper, corr, noncentrality, nu: float) -> CdfResult:
    """Reference t cdf on fixed Gauss-Legendre grids, for dimension <= 3.

    Computes the same probability as ``mvt_cdf`` by integrating exact
    bivariate normal cdfs over the chi scale mixture (and one conditioning
    coordinate when d=3).  Every ingredient is analytic and the nodes are
    fixed, so the result is both accurate to roughly 1e-10 and a smooth
    function of the limits; the latter makes it a usable baseline for
    finite-difference comparisons, where QMC error would dominate.
    """
    if not nu > 0:
        raise ValueError("degrees of freedom nu must be positive")
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    delta = np.broadcast_to(np.asarray(noncentrality, dtype=float), upper.shape).copy()
    mat = _as_matrix(corr)
    stripped = _strip_infinite(upper, delta, mat)
    if stripped is None:
        return CdfResult(np.log(_TINY), 0.0, 0, True)
    upper, delta, mat = stripped
    d = upper.size
    if d == 0:
        return CdfResult(0.0, 0.0, 0, True)
    if d == 1:
        p = univariate_t_cdf(float(upper[0]), float(delta[0]), nu)
        return CdfResult(float(np.log(max(p, _TINY))), 0.0, 0, True)
    if d > 3:
        raise ValueError("quadrature evaluation is limited to dimension <= 3")
    _, upper, delta, mat = _reorder(upper, delta, mat)
    _chol(mat)  # positive-definiteness check
    s, ws = _chi_rule(float(nu), 96)
    limits = upper * s[:, None] - delta  # (96, d)
    if d == 2:
        vals = _bvn_cdf(limits[:, 0], limits[:, 1], float(mat[0, 1]))
        points = s.size
    else:
        r12, r13, r23 = float(mat[0, 1]), float(mat[0, 2]), float(mat[1, 2])
        w2 = np.sqrt(1.0 - r12**2)
        w3 = np.sqrt(1.0 - r13**2)
        rho_c = (r23 - r12 * r13) / (w2 * w3)
        # condition on the first coordinate; its cdf substitution keeps the
        # integrand analytic on the unit square
        t, wt = _leggauss01(64)
        p1 = special.ndtr(limits[:, 0])  # (96,)
        x1 = special.ndtri(np.clip(p1[:, None] * t, _TINY, 1.0 - _UNIT_EPS))
        a = (limits[:, 1, None] - r12 * x1) / w2
        b = (limits[:, 2, None] - r13 * x1) / w3
        vals = (_bvn_cdf(a, b, rho_c) @ wt) * p1
        points = s.size * t.size
    val = float(ws @ vals)
    val = min(max(val, _TINY), 1.0)
    return CdfResult(float(np.log(val)), 0.0, int(points), True)


def univariate_t_cdf(x: float, kappa: float, nu: float) -> float:
    """Exact univariate (non-central) t cdf; not a QMC approximation."""
    if not nu > 0:
        raise ValueError("degrees of freedom nu must be positive")
    if kappa == 0.0:
        return float(special.stdtr(nu, x))
    return float(stats.nct.cdf(x, nu, kappa))
