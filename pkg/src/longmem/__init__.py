"""Banded Cholesky estimation of inverse autocovariance matrices for
long-memory time series."""

from .errors import (
    ConditioningError,
    ConvergenceError,
    DegenerateDataError,
    LongmemError,
    ModelError,
    NotApplicableError,
    NotPositiveDefiniteError,
    ParameterError,
    PrecisionError,
    RankError,
    SingularGramError,
    SizeCapError,
)
from .farima import (
    AutocovSequence,
    FarimaModel,
    PredictorTable,
    RatioCheckReport,
    WeightSequence,
    arma_weights,
    autocov,
    durbin_levinson,
    frac_weights,
    predictor_ratio_check,
    simulate,
)
from .banding import (
    SarConfig,
    SarTrace,
    SensitivityResult,
    sar_defaults,
    select_k,
    sensitivity,
    true_inverse_dense,
)
from .cholesky import (
    BandedCholInverse,
    SampleGram,
    approximation_error_curve,
    build_estimated_inverse,
    build_population_inverse,
    fit_all_orders,
    fit_ar_ls,
    inverse_apply,
)
from .regression import (
    REGRESSION_MODELS,
    DesignMatrix,
    DetrendResult,
    FglsResult,
    ModelSelectResult,
    RateDiagnostic,
    build_detrended_inverse,
    cosine_design,
    detrend,
    fgls,
    fgls_rate_diagnostic,
    model_select,
    polynomial_design,
    predictor_estimate,
    trend_signal,
)
from .linops import (
    DenseOp,
    FuncOp,
    LinearOperator,
    SymmetricToeplitzOp,
    materialize,
    op_difference,
    spectral_norm,
    toeplitz_apply,
)
from .experiments import (
    ExperimentConfig,
    ExperimentRow,
    TableResult,
    config_from_file,
    desk_config,
    full_config,
    op_rate,
    run_l2_table,
    run_regression_table,
    run_sf_table,
    run_table,
    table_csv,
    table_json,
    worker_count,
)

__version__ = "0.1.0"

__all__ = [
    "AutocovSequence",
    "BandedCholInverse",
    "ConditioningError",
    "ConvergenceError",
    "DegenerateDataError",
    "DenseOp",
    "DesignMatrix",
    "DetrendResult",
    "ExperimentConfig",
    "ExperimentRow",
    "FarimaModel",
    "FglsResult",
    "FuncOp",
    "LinearOperator",
    "LongmemError",
    "ModelError",
    "ModelSelectResult",
    "NotApplicableError",
    "NotPositiveDefiniteError",
    "ParameterError",
    "PrecisionError",
    "PredictorTable",
    "REGRESSION_MODELS",
    "RankError",
    "RateDiagnostic",
    "RatioCheckReport",
    "SampleGram",
    "SarConfig",
    "SarTrace",
    "SensitivityResult",
    "SingularGramError",
    "SizeCapError",
    "SymmetricToeplitzOp",
    "TableResult",
    "WeightSequence",
    "approximation_error_curve",
    "arma_weights",
    "autocov",
    "build_detrended_inverse",
    "build_estimated_inverse",
    "build_population_inverse",
    "config_from_file",
    "cosine_design",
    "desk_config",
    "detrend",
    "durbin_levinson",
    "fgls",
    "fgls_rate_diagnostic",
    "fit_all_orders",
    "fit_ar_ls",
    "frac_weights",
    "full_config",
    "inverse_apply",
    "materialize",
    "model_select",
    "op_difference",
    "op_rate",
    "polynomial_design",
    "predictor_estimate",
    "predictor_ratio_check",
    "run_l2_table",
    "run_regression_table",
    "run_sf_table",
    "run_table",
    "sar_defaults",
    "select_k",
    "sensitivity",
    "simulate",
    "spectral_norm",
    "table_csv",
    "table_json",
    "toeplitz_apply",
    "trend_signal",
    "true_inverse_dense",
    "worker_count",
    "__version__",
]
