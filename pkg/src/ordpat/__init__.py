"""Ordinal pattern dependence between two time series and CUSUM tests for breaks in it."""

__version__ = "0.1.0"

from .breaktest import (  # noqa: E402
    BreakTestResult,
    KolmogorovDist,
    cusum_trajectory,
    kolmogorov_cdf,
    kolmogorov_quantile,
    t_statistic,
    w_statistic,
)
from .errors import (  # noqa: E402
    DataError,
    DegenerateVarianceError,
    DimensionError,
    InvalidInputError,
    OrdpatError,
)
from .estimators import (  # noqa: E402
    AwopdEstimate,
    DependenceEstimates,
    PairedSeries,
    awopd_value,
    comparison_value,
    estimate_awopd,
    estimate_dependence,
    estimate_p,
    estimate_q,
    estimate_q_marginals,
    estimate_r,
    estimate_s,
    ord_coefficient,
)
from .longrun import KernelConfig, awopd_longrun, gamma2_q, longrun_cov_matrix, longrun_variance  # noqa: E402
from .metrics import PatternMetric, WeightFunction, chaos_score, d_chaos, d_discrete, d_l1  # noqa: E402
from .patterns import Pattern, pattern_index, pattern_of, pattern_sequence, reflect, unrank  # noqa: E402
