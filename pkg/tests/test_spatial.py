import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from extremalst.spatial import (
    CorrelationConfig,
    CorrelationMatrix,
    PositiveDefiniteError,
    SiteSet,
    build_correlation_matrix,
    pairwise_distances,
    powered_exponential_correlation,
    sites_from_csv,
    slant_field,
    uniform_sites,
)

coord_arrays = st.integers(2, 8).flatmap(
    lambda d: st.lists(
        st.tuples(st.floats(-50, 50), st.floats(-50, 50)),
        min_size=d, max_size=d, unique=True,
    )
)


class TestSiteSet:
    def test_shape_properties(self):
        s = SiteSet(np.array([[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]]))
        assert s.d == 3 and s.k == 2

    def test_single_site_allowed(self):
        assert SiteSet(np.array([[0.5, 0.5]])).d == 1

    def test_duplicate_sites_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            SiteSet(np.array([[0.0, 0.0], [0.0, 0.0]]))

    def test_subset_keeps_ids(self):
        s = SiteSet(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), ("a", "b", "c"))
        sub = s.subset([2, 0])
        assert sub.site_ids == ("c", "a")
        assert np.allclose(sub.coords, [[2.0, 0.0], [0.0, 0.0]])

    @given(coord_arrays)
    def test_distances_symmetric_with_zero_diagonal(self, coords):
        try:
            s = SiteSet(np.asarray(coords, dtype=float))
        except ValueError:
            return  # nearly coincident random sites
        dist = pairwise_distances(s)
        assert np.allclose(dist, dist.T)
        assert np.allclose(np.diag(dist), 0.0)
        assert np.all(dist >= 0)


class TestCorrelation:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            CorrelationConfig(r=0.0, eta=1.0)
        with pytest.raises(ValueError):
            CorrelationConfig(r=1.0, eta=2.5)
        with pytest.raises(ValueError):
            CorrelationConfig(r=1.0, eta=0.0)

    def test_value_at_zero_distance(self):
        cfg = CorrelationConfig(r=2.0, eta=1.5)
        assert powered_exponential_correlation(0.0, cfg) == 1.0

    def test_known_value(self):
        cfg = CorrelationConfig(r=2.0, eta=1.0)
        assert powered_exponential_correlation(2.0, cfg) == pytest.approx(np.exp(-1.0))

    @given(
        st.floats(0.1, 20.0), st.floats(0.1, 2.0),
        st.floats(0.0, 100.0), st.floats(0.001, 100.0),
    )
    def test_monotone_decreasing_in_distance(self, r, eta, h, dh):
        cfg = CorrelationConfig(r=r, eta=eta)
        assert powered_exponential_correlation(h + dh, cfg) <= \
            powered_exponential_correlation(h, cfg) + 1e-15

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            powered_exponential_correlation(-1.0, CorrelationConfig(r=1.0, eta=1.0))

    def test_matrix_is_positive_definite(self):
        sites = uniform_sites(12, seed=0)
        mat = build_correlation_matrix(sites, CorrelationConfig(r=3.0, eta=1.2))
        assert mat.dim == 12
        np.linalg.cholesky(mat.values)
        assert np.allclose(np.diag(mat.values), 1.0)

    def test_correlation_matrix_validation(self):
        with pytest.raises(ValueError, match="symmetric"):
            CorrelationMatrix(np.array([[1.0, 0.5], [0.2, 1.0]]))
        with pytest.raises(ValueError, match="diagonal"):
            CorrelationMatrix(np.array([[2.0, 0.0], [0.0, 2.0]]))
        with pytest.raises(PositiveDefiniteError):
            CorrelationMatrix(np.array([[1.0, 1.0], [1.0, 1.0]]))


class TestSlantField:
    def test_two_coefficients_have_no_intercept(self):
        s = SiteSet(np.array([[0.0, 0.0], [1.0, 2.0]]))
        alpha = slant_field(s, (3.0, -1.0))
        assert np.allclose(alpha, [0.0, 3.0 - 2.0])

    def test_three_coefficients_include_intercept(self):
        s = SiteSet(np.array([[0.0, 0.0], [1.0, 2.0]]))
        alpha = slant_field(s, (0.5, 3.0, -1.0))
        assert np.allclose(alpha, [0.5, 0.5 + 3.0 - 2.0])

    @given(
        st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 1.0)
    )
    def test_linearity_in_coefficients(self, a, b, c, scale):
        s = uniform_sites(5, seed=7)
        base = slant_field(s, (a, b, c))
        assert np.allclose(slant_field(s, (scale * a, scale * b, scale * c)),
                           scale * base, atol=1e-9)

    def test_wrong_coefficient_count(self):
        s = uniform_sites(3, seed=1)
        with pytest.raises(ValueError):
            slant_field(s, (1.0,))


class TestSiteConstruction:
    def test_uniform_sites_deterministic_and_bounded(self):
        a = uniform_sites(20, seed=5)
        b = uniform_sites(20, seed=5)
        assert np.array_equal(a.coords, b.coords)
        assert np.all(a.coords >= -5.0) and np.all(a.coords <= 5.0)
        assert not np.array_equal(a.coords, uniform_sites(20, seed=6).coords)

    def test_sites_from_csv_roundtrip(self, tmp_path):
        p = tmp_path / "sites.csv"
        p.write_text("site_id,x,y\nA,1.0,2.0\nB,-1.5,0.25\n")
        s = sites_from_csv(p)
        assert s.site_ids == ("A", "B")
        assert np.allclose(s.coords, [[1.0, 2.0], [-1.5, 0.25]])

    def test_sites_from_csv_offset(self, tmp_path):
        p = tmp_path / "sites.csv"
        p.write_text("site_id,x,y\nA,1.0,2.0\nB,3.0,4.0\n")
        s = sites_from_csv(p, centre_offset=(1.0, 2.0))
        assert np.allclose(s.coords, [[0.0, 0.0], [2.0, 2.0]])

    def test_sites_from_csv_empty(self, tmp_path):
        p = tmp_path / "sites.csv"
        p.write_text("site_id,x,y\n")
        with pytest.raises(ValueError, match="no sites"):
            sites_from_csv(p)
