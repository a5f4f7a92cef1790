"""Compositional-data regression toolkit.

Simplex transforms (power family, ilr, alr), regression with compositional
responses through a simplex-valued link, KL- and likelihood-based selection
of the power parameter, EM zero imputation, and principal component
regression with compositional predictors.
"""

from .exceptions import CompregError, ConfigError, DataError, NumericError
from .impute import ChangedCell, ImputeConfig, ImputeResult, detect_limits, em_impute, multiplicative_replace
from .pcr import (
    CvCell,
    CvReport,
    FactorEncoding,
    PcrModel,
    Standardizer,
    adjusted_r2,
    assign_folds,
    cross_validate,
    pcr_fit,
    pcr_predict,
    standardized_residuals,
)
from .regression import (
    AlphaRegModel,
    AlphaSelection,
    DesignMatrix,
    default_alpha_grid,
    fit_alpha_regression,
    fit_alr_regression,
    predict,
    profile_objective,
    select_alpha_by_kl,
    select_alpha_by_profile,
)
from .simplex import (
    AlphaParam,
    Composition,
    CompositionBatch,
    TransformedBatch,
    alpha_log_jacobian,
    alpha_transform,
    alpha_transform_batch,
    alr,
    alr_batch,
    close,
    close_batch,
    helmert_submatrix,
    ilr,
    ilr_batch,
    inverse_alpha_transform,
    inverse_alpha_transform_batch,
    inverse_alr,
    inverse_alr_batch,
    inverse_ilr,
    inverse_ilr_batch,
    kl_fit_divergence,
    power_transform,
)

__version__ = "0.1.0"
