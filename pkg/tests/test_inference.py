import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from extremalst.exponent import ModelSpec
from extremalst.inference import (
    BenchStats,
    GevParams,
    benchmark,
    fit_dependence,
    fit_gev_margins,
    rmse,
    to_unit_frechet,
    trre,
)
from extremalst.likelihood import MaximaDataset, select_tuples
from extremalst.qmc_cdf import table_preset
from extremalst.simulate import labels_to_partition, simulate_extremal_t
from extremalst.spatial import CorrelationConfig, uniform_sites


def t_model(r=3.0, eta=1.0, nu=2.0):
    return ModelSpec("extremal-t", CorrelationConfig(r=r, eta=eta), nu=nu)


def make_data(d=3, n=25, seed=1, model=None):
    sites = uniform_sites(d, seed=seed)
    model = model or t_model()
    out = simulate_extremal_t(sites, model, n, seed=seed + 50)
    scen = tuple(labels_to_partition(h) for h in out.H)
    return MaximaDataset(sites=sites, Z=out.Z, scenarios=scen)


class TestGevMargins:
    def test_params_validation(self):
        with pytest.raises(ValueError):
            GevParams(mu=[0.0], sigma=[-1.0], shape_coeffs=(0.1, 0, 0),
                      covariates=[[0.0, 0.0]])
        with pytest.raises(ValueError):
            GevParams(mu=[0.0], sigma=[1.0], shape_coeffs=(0.1, 0),
                      covariates=[[0.0, 0.0]])

    def test_shape_surface(self):
        p = GevParams(mu=[0.0, 0.0], sigma=[1.0, 1.0],
                      shape_coeffs=(0.1, 0.02, -0.01),
                      covariates=[[1.0, 2.0], [0.0, 0.0]])
        assert p.xi == pytest.approx([0.1 + 0.02 - 0.02, 0.1])

    def test_recovers_known_margins(self):
        rng = np.random.default_rng(5)
        cov = uniform_sites(3, seed=8).coords
        xi = 0.15 + 0.01 * cov[:, 0]
        raw = np.column_stack([
            stats.genextreme.rvs(-xi[i], loc=2.0 + i, scale=1.5,
                                 size=1500, random_state=rng)
            for i in range(3)
        ])
        p = fit_gev_margins(raw, cov)
        assert np.allclose(p.mu, [2.0, 3.0, 4.0], atol=0.15)
        assert np.allclose(p.sigma, 1.5, atol=0.15)
        assert p.shape_coeffs[0] == pytest.approx(0.15, abs=0.08)

    def test_warns_on_short_series(self):
        rng = np.random.default_rng(6)
        raw = stats.genextreme.rvs(0.0, size=(10, 1), random_state=rng)
        with pytest.warns(UserWarning, match="unstable"):
            fit_gev_margins(raw, [[0.0, 0.0]])

    def test_frechet_transform_is_uniform_frechet(self):
        rng = np.random.default_rng(7)
        cov = uniform_sites(2, seed=9).coords
        p = GevParams(mu=[1.0, 2.0], sigma=[1.0, 0.5],
                      shape_coeffs=(0.2, 0.0, 0.0), covariates=cov)
        raw = np.column_stack([
            stats.genextreme.rvs(-p.xi[i], loc=p.mu[i], scale=p.sigma[i],
                                 size=800, random_state=rng)
            for i in range(2)
        ])
        data = to_unit_frechet(raw, p)
        assert data.sites.d == 2
        for col in range(2):
            _, pval = stats.kstest(data.Z[:, col], lambda z: np.exp(-1.0 / z))
            assert pval > 0.01


class TestFitDependence:
    def test_beats_truth_on_its_own_objective(self):
        # a single small dataset does not pin (r, eta) down, so check the
        # optimizer, not recovery: the fit must score at least as well as
        # the true parameters on the same objective
        from extremalst.likelihood import st_loglik

        truth = t_model(r=3.0, eta=1.0)
        data = make_data(d=4, n=40, seed=3, model=truth)
        cfg = table_preset("type-I")
        res = fit_dependence(data, truth, objective="st", cfg=cfg, seed=0)
        assert res.converged and res.evaluations > 0 and res.wall_time > 0
        assert res.loglik >= st_loglik(data, truth, None, cfg) - 1e-6
        assert res.estimates["r"] > 0 and 0 < res.estimates["eta"] <= 2
        assert res.estimates["nu"] == 2.0  # fixed by default

    def test_composite_objective(self):
        truth = t_model()
        data = make_data(d=4, n=15, seed=4, model=truth)
        sel = select_tuples(data.sites, 2, target_count=4)
        res = fit_dependence(data, truth, objective="cl", j=2, selection=sel,
                             cfg=table_preset(2), seed=0)
        assert res.converged
        res2 = fit_dependence(data, truth, objective="cl", j=2, selection=sel,
                              cfg=table_preset(2), seed=0, use_scenarios=True)
        assert res2.converged

    def test_cl_needs_selection(self):
        data = make_data(d=3, n=5)
        with pytest.raises(ValueError):
            fit_dependence(data, t_model(), objective="cl", j=2)

    def test_unknown_objective(self):
        data = make_data(d=3, n=5)
        with pytest.raises(ValueError):
            fit_dependence(data, t_model(), objective="pairwise")

    def test_nu_grid_returns_table(self):
        truth = t_model(nu=2.0)
        data = make_data(d=3, n=12, seed=5, model=truth)
        res = fit_dependence(data, truth, objective="st", nu=[1.0, 2.0, 8.0],
                             cfg=table_preset("type-II"), seed=0)
        assert res.nu_grid_table is not None and len(res.nu_grid_table) == 3
        grid_vals = [v for v, _ in res.nu_grid_table]
        assert grid_vals == [1.0, 2.0, 8.0]
        best = max(res.nu_grid_table, key=lambda t: t[1])
        assert res.estimates["nu"] == best[0]
        assert res.loglik == best[1]


class TestBenchmarkStats:
    def test_rmse_hand_values(self):
        s = rmse([1.0, 3.0], truth=1.0, times=[2.0, 4.0])
        assert s.bias == pytest.approx(1.0)
        assert s.sd == pytest.approx(np.sqrt(2.0))
        assert s.rmse == pytest.approx(np.sqrt(3.0))
        assert s.mean_time == pytest.approx(3.0)
        assert s.replicates == 2

    def test_rmse_needs_two(self):
        with pytest.raises(ValueError):
            rmse([1.0], truth=1.0)

    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=20),
           st.floats(-5, 5))
    def test_rmse_identity(self, est, truth):
        s = rmse(est, truth)
        assert s.rmse**2 == pytest.approx(s.bias**2 + s.sd**2, abs=1e-9)

    def test_benchstats_identity_enforced(self):
        with pytest.raises(ValueError):
            BenchStats(bias=1.0, sd=1.0, rmse=1.0, mean_time=0.0, replicates=2)

    def test_trre(self):
        a = rmse([1.0, 3.0], truth=1.0)
        b = rmse([0.5, 1.5], truth=1.0)
        assert trre(b, a, time_j=1.0, time_full=4.0) == pytest.approx(
            (a.rmse / b.rmse) * 4.0)
        with pytest.raises(ValueError):
            trre(a, b, time_j=0.0, time_full=1.0)

    def test_benchmark_smoke(self):
        sites = uniform_sites(3, seed=6)
        model = t_model()
        res = benchmark(sites, model, N=10, replicates=2, objective="st",
                        cfg=table_preset("type-II"), processes=1, seed=0)
        assert set(res["stats"]) == {"r", "eta", "nu"}
        assert res["truth"]["r"] == 3.0
        assert res["estimates"]["r"].shape == (2,)
        assert res["times"].shape == (2,)
        check = rmse(res["estimates"]["r"], res["truth"]["r"],
                     times=res["times"])
        assert res["stats"]["r"].rmse == pytest.approx(check.rmse)

    def test_benchmark_needs_replicates(self):
        with pytest.raises(ValueError):
            benchmark(uniform_sites(2, seed=0), t_model(), N=5, replicates=1)
