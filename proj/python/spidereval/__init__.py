"""Python bindings for the spidereval statistics core."""

from ._core import (
    ComputationError,
    SpiderEvalError,
    ValidationError,
    __version__,
    bh_fdr,
    chi_square_sf,
    dunn_posthoc,
    epsilon_squared,
    fit_learning_curve,
    fit_ridge,
    icc2k,
    kruskal_wallis,
    mae,
    normal_quantile,
    overlap_stats,
    paired_one_sided_t,
    r2,
    rmse,
    run_qc,
    student_t_sf,
    synth_ratings,
    wilson_ci,
)

__all__ = [
    "ComputationError",
    "SpiderEvalError",
    "ValidationError",
    "__version__",
    "bh_fdr",
    "chi_square_sf",
    "dunn_posthoc",
    "epsilon_squared",
    "fit_learning_curve",
    "fit_ridge",
    "icc2k",
    "kruskal_wallis",
    "mae",
    "normal_quantile",
    "overlap_stats",
    "paired_one_sided_t",
    "r2",
    "rmse",
    "run_qc",
    "student_t_sf",
    "synth_ratings",
    "wilson_ci",
]
