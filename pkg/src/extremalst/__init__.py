"""Exact simulation and likelihood inference for extremal-t and extremal
skew-t max-stable processes."""

from .exponent import (
    CondParams,
    ExponentContext,
    ExponentResult,
    ModelSpec,
    conditional_intensity,
    conditional_params,
    exponent_partial,
    exponent_V,
    intensity,
)
from .inference import (
    BenchStats,
    FitResult,
    GevParams,
    benchmark,
    fit_dependence,
    fit_gev_margins,
    rmse,
    to_unit_frechet,
    trre,
)
from .likelihood import (
    HittingScenario,
    LikelihoodError,
    MaximaDataset,
    TupleSelection,
    cl_loglik,
    derive_hitting_scenarios,
    enumerate_partitions,
    full_loglik,
    select_tuples,
    st_loglik,
)
from .qmc_cdf import (
    CdfResult,
    QmcConfig,
    QmcPreset,
    mvn_cdf,
    mvt_cdf,
    mvt_cdf_quad,
    table_preset,
    univariate_t_cdf,
)
from .simulate import (
    SimOutput,
    labels_to_partition,
    p_s0_params,
    simulate_extremal_skew_t,
    simulate_extremal_t,
)
from .skewt import (
    ExtSkewTParams,
    MPlusVector,
    SamplingError,
    log_m_plus,
    m_plus,
    marginal_slant_extension,
    nc_ext_skew_t_cdf,
    nc_ext_skew_t_pdf,
    sample_nc_ext_skew_t,
)
from .spatial import (
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

__version__ = "0.1.0"
