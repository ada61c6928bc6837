import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from extremalst.qmc_cdf import QmcConfig
from extremalst.skewt import (
    ExtSkewTParams,
    SamplingError,
    log_m_plus,
    m_plus,
    marginal_slant_extension,
    nc_ext_skew_t_cdf,
    nc_ext_skew_t_cdf_many,
    nc_ext_skew_t_pdf,
    sample_nc_ext_skew_t,
)

TIGHT = QmcConfig(epsilon=1e-5, n_min=1000, n_max=8000)


def params_1d(alpha=1.5, tau=0.5, kappa=-0.5, nu=3.0):
    return ExtSkewTParams(mu=np.zeros(1), Omega=np.eye(1),
                          alpha=np.array([alpha]), tau=tau, kappa=kappa, nu=nu)


def params_2d(rho=0.4, alpha=(1.0, -0.5), tau=0.3, kappa=-0.3, nu=2.0):
    om = np.array([[1.0, rho], [rho, 1.0]])
    return ExtSkewTParams(mu=np.zeros(2), Omega=om, alpha=np.asarray(alpha, float),
                          tau=tau, kappa=kappa, nu=nu)


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExtSkewTParams(mu=np.zeros(2), Omega=np.eye(3),
                           alpha=np.zeros(2), tau=0.0, kappa=0.0, nu=1.0)
        with pytest.raises(ValueError):
            ExtSkewTParams(mu=np.zeros(1), Omega=np.array([[-1.0]]),
                           alpha=np.zeros(1), tau=0.0, kappa=0.0, nu=1.0)
        with pytest.raises(ValueError):
            params_1d(nu=-2.0)

    def test_semidefinite_scale_allowed(self):
        om = np.array([[0.0, 0.0], [0.0, 1.0]])
        p = ExtSkewTParams(mu=np.zeros(2), Omega=om, alpha=np.zeros(2),
                           tau=0.0, kappa=0.0, nu=1.0)
        # degenerate coordinate gets a unit placeholder scale
        assert p.omega[0] == 1.0

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.5, 10))
    def test_bar_quantities_share_normalizer(self, alpha, tau, nu):
        p = params_1d(alpha=alpha, tau=tau, kappa=-tau, nu=nu)
        root = np.sqrt(1.0 + p.q_alpha)
        assert p.tau_bar == pytest.approx(tau / root)
        assert p.kappa_bar == pytest.approx(-tau / root)


class TestPdf:
    def test_reduces_to_t(self):
        p = ExtSkewTParams(mu=np.array([0.5]), Omega=np.array([[2.0]]),
                           alpha=np.zeros(1), tau=0.0, kappa=0.0, nu=3.0)
        for y in (-1.0, 0.0, 2.5):
            want = stats.t.logpdf(y, 3.0, loc=0.5, scale=np.sqrt(2.0))
            assert nc_ext_skew_t_pdf([y], p) == pytest.approx(want, abs=1e-12)

    def test_integrates_to_one_1d(self):
        p = params_1d()
        total, _ = integrate.quad(lambda y: np.exp(nc_ext_skew_t_pdf([y], p)),
                                  -np.inf, np.inf, limit=200)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_integrates_to_one_2d(self):
        p = params_2d(nu=5.0)
        total, _ = integrate.dblquad(
            lambda y2, y1: np.exp(nc_ext_skew_t_pdf([y1, y2], p)),
            -60, 60, -60, 60, epsabs=1e-6)
        assert total == pytest.approx(1.0, abs=1e-4)


class TestCdf:
    def test_slant_free_reduces_to_t(self):
        p = ExtSkewTParams(mu=np.zeros(1), Omega=np.eye(1), alpha=np.zeros(1),
                           tau=0.0, kappa=0.0, nu=4.0)
        res = nc_ext_skew_t_cdf([0.7], p, TIGHT)
        assert res.value == pytest.approx(stats.t.cdf(0.7, 4.0), abs=1e-12)

    def test_exact_1d_matches_quadrature(self):
        p = params_1d()
        res = nc_ext_skew_t_cdf([0.4], p, TIGHT)
        want, _ = integrate.quad(lambda y: np.exp(nc_ext_skew_t_pdf([y], p)),
                                 -np.inf, 0.4, limit=200)
        assert res.value == pytest.approx(want, abs=1e-8)

    def test_qmc_matches_exact_1d(self):
        p = params_1d()
        exact = nc_ext_skew_t_cdf([0.4], p, TIGHT, method="exact")
        qmc = nc_ext_skew_t_cdf([0.4], p, TIGHT, method="qmc")
        assert qmc.value == pytest.approx(exact.value, abs=1e-3)

    def test_2d_matches_density_quadrature(self):
        p = params_2d()
        res = nc_ext_skew_t_cdf([0.5, -0.2], p, TIGHT)
        want, _ = integrate.dblquad(
            lambda y2, y1: np.exp(nc_ext_skew_t_pdf([y1, y2], p)),
            -30, 0.5, -30, -0.2, epsabs=1e-6)
        assert res.value == pytest.approx(want, abs=2e-3)

    def test_quad_matches_qmc(self):
        p = params_2d()
        quad = nc_ext_skew_t_cdf([0.5, -0.2], p, TIGHT, method="quad")
        qmc = nc_ext_skew_t_cdf([0.5, -0.2], p, TIGHT, method="qmc")
        assert quad.value == pytest.approx(qmc.value, abs=3 * qmc.err_estimate + 1e-7)

    def test_quad_1d_routes_to_exact(self):
        p = params_1d()
        quad = nc_ext_skew_t_cdf([0.4], p, TIGHT, method="quad")
        exact = nc_ext_skew_t_cdf([0.4], p, TIGHT, method="exact")
        assert quad.value == pytest.approx(exact.value, abs=1e-12)

    def test_limits_to_one(self):
        p = params_2d()
        res = nc_ext_skew_t_cdf([60.0, 60.0], p, TIGHT)
        assert res.value == pytest.approx(1.0, abs=5e-3)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            nc_ext_skew_t_cdf([0.0], params_1d(), TIGHT, method="magic")

    def test_many_matches_single(self, rng):
        p = params_2d()
        rows = rng.uniform(-1.5, 1.5, size=(5, 2))
        taus = rng.uniform(-0.5, 0.5, size=5)
        many = nc_ext_skew_t_cdf_many(rows, p.omega_bar, p.alpha, taus,
                                      p.kappa, p.nu, TIGHT)
        for row, tau, res in zip(rows, taus, many):
            q = ExtSkewTParams(mu=np.zeros(2), Omega=p.Omega, alpha=p.alpha,
                               tau=float(tau), kappa=p.kappa, nu=p.nu)
            one = nc_ext_skew_t_cdf(row, q, TIGHT, method="qmc")
            tol = 3 * (res.err_estimate + one.err_estimate) + 1e-5
            assert abs(res.value - one.value) < tol

    def test_many_slant_free_reduction(self):
        rows = np.array([[0.3, -0.4], [1.0, 0.2]])
        om = params_2d().omega_bar
        many = nc_ext_skew_t_cdf_many(rows, om, np.zeros(2), 0.0, 0.0, 3.0, TIGHT)
        from extremalst.qmc_cdf import mvt_cdf_many

        plain = mvt_cdf_many(rows, om, np.zeros(2), 3.0, TIGHT)
        for a, b in zip(many, plain):
            assert a.log_value == b.log_value


class TestMarginalization:
    def test_keep_all_is_identity(self):
        p = params_2d()
        a, t = marginal_slant_extension(p.omega_bar, p.alpha, p.tau, [0, 1])
        assert np.allclose(a, p.alpha) and t == pytest.approx(p.tau)

    def test_marginal_cdf_consistency(self):
        # dropping a coordinate by sending its limit to +inf must match the
        # 1-d law with the marginal slant/extension
        p = params_2d()
        a1, t1 = marginal_slant_extension(p.omega_bar, p.alpha, p.tau, [0])
        q = ExtSkewTParams(mu=np.zeros(1), Omega=np.eye(1), alpha=a1,
                           tau=t1, kappa=p.kappa, nu=p.nu)
        want = nc_ext_skew_t_cdf([0.3], q, TIGHT).value
        got = nc_ext_skew_t_cdf([0.3, 40.0], p, TIGHT).value
        assert got == pytest.approx(want, abs=5e-3)


class TestMPlus:
    def test_slant_free_closed_form(self):
        # the normalizer is the nu-th positive moment of the standard normal
        # spectral law: 2^(nu/2 - 1) Gamma((nu+1)/2) / sqrt(pi)
        for nu in (1.0, 2.5):
            want, _ = integrate.quad(lambda y: y**nu * stats.norm.pdf(y),
                                     0, np.inf, limit=200)
            got = m_plus(np.eye(2), np.zeros(2), 0.0, nu)
            assert np.allclose(got.values, want, rtol=1e-8)

    def test_skewed_value_by_quadrature(self):
        # extended skew-normal spectral law with marginal slant/extension
        alpha, tau, nu = 2.0, 0.4, 1.5
        norm = stats.norm.cdf(tau / np.sqrt(1.0 + alpha**2))

        def density(y):
            return stats.norm.pdf(y) * stats.norm.cdf(alpha * y + tau) / norm

        want, _ = integrate.quad(lambda y: y**nu * density(y), 0, np.inf, limit=200)
        got = float(m_plus(np.eye(1), np.array([alpha]), tau, nu).values[0])
        assert got == pytest.approx(want, rel=1e-6)

    def test_log_values_consistent(self):
        mp = m_plus(np.eye(3), np.array([1.0, 0.0, -1.0]), 0.5, 2.0)
        assert np.allclose(np.log(mp.values), mp.log_values)
        assert np.allclose(mp.log_values,
                           log_m_plus(np.eye(3), np.array([1.0, 0.0, -1.0]), 0.5, 2.0))

    def test_marginalization_invariance(self):
        # the site normalizer must not depend on which other sites are kept
        rng = np.random.default_rng(3)
        a = rng.normal(size=4)
        base = rng.normal(size=(4, 6))
        om = base @ base.T
        w = np.sqrt(np.diag(om))
        om = om / np.outer(w, w)
        full = log_m_plus(om, a, 0.7, 2.0)
        keep = [0, 2]
        a_k, t_k = marginal_slant_extension(om, a, 0.7, keep)
        sub = log_m_plus(om[np.ix_(keep, keep)], a_k, t_k, 2.0)
        assert np.allclose(sub, full[keep], atol=1e-12)


class TestSampling:
    def test_deterministic(self):
        p = params_2d()
        a = sample_nc_ext_skew_t(p, 50, np.random.default_rng(4))
        b = sample_nc_ext_skew_t(p, 50, np.random.default_rng(4))
        assert np.array_equal(a, b)

    def test_1d_ks_against_exact_cdf(self):
        p = params_1d()
        x = sample_nc_ext_skew_t(p, 400, np.random.default_rng(11))[:, 0]
        grid = np.linspace(x.min() - 1, x.max() + 1, 200)
        cdf_grid = np.array([
            nc_ext_skew_t_cdf([g], p, TIGHT, method="exact").value for g in grid
        ])
        stat, pval = stats.kstest(x, lambda q: np.interp(q, grid, cdf_grid))
        assert pval > 0.01

    def test_bad_n(self):
        with pytest.raises(ValueError):
            sample_nc_ext_skew_t(params_1d(), 0, np.random.default_rng(0))
