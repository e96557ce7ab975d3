"""Auto-calibration tests for discrete finite regression functions."""

__version__ = "0.1.0"

from .asymptotics import (  # noqa: E402
    NullDistributionSpec,
    QuantileResult,
    TestId,
    asymptotic_cov,
    critical_value,
    p_value,
    quantile_test1a,
    quantile_test1b,
    rw_max_quantile,
    weighted_chisq_quantile,
)
from .core import (  # noqa: E402
    CurveStats,
    IncrementVector,
    LevelPartition,
    NullModel,
    Observation,
    Sample,
    bin_by_quantiles,
    build_partition,
    chi2_statistic,
    curve_stats,
    estimate_null_model,
    increments,
    lift_points,
    normalized_increments,
    v2_unweighted,
    v2_weighted,
)
from .simulation import (  # noqa: E402
    Contamination,
    GammaLevelModel,
    PowerCurve,
    ReplicationSummary,
    power_study,
    replicate_stats,
    simulate_sample,
)
from .testing import MCConfig, TestFailure, TestOutcome, assess, run_all, run_test  # noqa: E402
