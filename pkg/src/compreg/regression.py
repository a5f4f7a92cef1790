"""Regression with compositional responses.

Two routes share one model object: the closed-form additive log-ratio
regression (ordinary least squares per log-ratio coordinate), and the
power-parameter regression that couples the multinomial-logit link with the
power-family transform and maximizes a profiled Gaussian objective over the
coefficient matrix. The power parameter is selected on a grid, either by the
twice Kullback-Leibler divergence between observed and fitted compositions or
by the profile objective itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .exceptions import (
    ConfigError,
    DataError,
    DimensionMismatch,
    NumericError,
    RankDeficientDesign,
    TooFewRows,
    ZeroPart,
)
from .impute import ImputeConfig, multiplicative_replace
from .simplex import (
    AlphaParam,
    CompositionBatch,
    alpha_log_jacobian,
    alpha_transform_batch,
    alr_batch,
    inverse_alr_batch,
    kl_fit_divergence,
    _alpha_coords,
    _alpha_value,
    _ilr_coords,
)

# keeps log-det finite when a fit interpolates the data exactly
_LOGDET_JITTER = 1e-30
_FTOL = 1e-8


@dataclass(frozen=True)
class DesignMatrix:
    """n x (p+1) design with a leading intercept column of ones, full rank."""

    values: np.ndarray
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatch("design matrix must be 2-d")
        if not np.all(values[:, 0] == 1.0):
            raise RankDeficientDesign("first design column must be all ones")
        if np.linalg.matrix_rank(values) < values.shape[1]:
            raise RankDeficientDesign("design matrix is rank deficient")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        names = tuple(str(c) for c in self.covariate_names)
        if names and len(names) != values.shape[1] - 1:
            raise DimensionMismatch(
                f"{len(names)} covariate names for {values.shape[1] - 1} covariates"
            )
        object.__setattr__(self, "covariate_names", names)

    @classmethod
    def from_covariates(cls, covariates, names: Sequence[str] | None = None) -> "DesignMatrix":
        cov = np.asarray(covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        ones = np.ones((cov.shape[0], 1))
        return cls(np.hstack([ones, cov]), tuple(names) if names else ())

    @classmethod
    def intercept_only(cls, n: int) -> "DesignMatrix":
        return cls(np.ones((n, 1)))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1] - 1


@dataclass(frozen=True)
class AlphaRegModel:
    """Fitted compositional regression.

    ``alpha`` is None for the log-ratio (zero-limit) model. ``coefficients``
    has one row per non-reference component (the first label is the
    reference), so row i holds the linear predictor of component i+1 against
    component 1. ``sigma_hat`` is the unbiased residual covariance on the
    transformed scale the model was fitted on. ``objective_value`` is the
    profiled log-likelihood including the transformation Jacobian, which
    makes it comparable across alphas; when the response contains zeros the
    Jacobian is undefined and the Gaussian term alone is stored.
    """

    alpha: AlphaParam | None
    coefficients: np.ndarray
    sigma_hat: np.ndarray
    objective_value: float
    component_labels: tuple[str, ...] | None = None
    covariate_names: tuple[str, ...] = ()
    converged: bool = True

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        sigma = np.asarray(self.sigma_hat, dtype=float)
        if coef.ndim != 2:
            raise DimensionMismatch("coefficients must be a d x (p+1) matrix")
        if sigma.shape != (coef.shape[0], coef.shape[0]):
            raise DimensionMismatch("sigma_hat must be d x d")
        if np.max(np.abs(sigma - sigma.T)) > 1e-10:
            raise DimensionMismatch("sigma_hat must be symmetric")
        if np.min(np.linalg.eigvalsh((sigma + sigma.T) / 2)) < -1e-10:
            raise DimensionMismatch("sigma_hat must be positive semi-definite")
        coef.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "sigma_hat", sigma)

    @property
    def d(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n_coefficients(self) -> int:
        return self.coefficients.size


def _link_parts(eta: np.ndarray) -> np.ndarray:
    """Inverse additive-logistic link, first component as reference."""
    shift = np.maximum(eta.max(axis=1), 0.0)
    expd = np.exp(eta - shift[:, None])
    first = np.exp(-shift)
    parts = np.hstack([first[:, None], expd])
    return parts / parts.sum(axis=1)[:, None]


def predict(model: AlphaRegModel, X_new: DesignMatrix) -> CompositionBatch:
    """Fitted compositions for new covariate rows; always strictly positive."""
    if X_new.values.shape[1] != model.coefficients.shape[1]:
        raise DimensionMismatch(
            f"design has {X_new.values.shape[1]} columns, model expects "
            f"{model.coefficients.shape[1]}"
        )
    eta = X_new.values @ model.coefficients.T
    return CompositionBatch(_link_parts(eta), model.component_labels)


def _check_fit_shapes(Y: CompositionBatch, X: DesignMatrix) -> None:
    if Y.n != X.n:
        raise DimensionMismatch(f"{Y.n} response rows vs {X.n} design rows")
    if Y.n <= X.p + 1:
        raise TooFewRows(
            f"need more than p+1={X.p + 1} rows for the unbiased covariance, got {Y.n}"
        )


def _ilr_profile_objective(Y_coords: np.ndarray, M_coords: np.ndarray) -> float:
    n, d = Y_coords.shape
    resid = Y_coords - M_coords
    cross = resid.T @ resid / n + _LOGDET_JITTER * np.eye(d)
    _, logdet = np.linalg.slogdet(cross)
    return float(-0.5 * n * logdet - 0.5 * n * d)


def fit_alr_regression(
    Y: CompositionBatch, X: DesignMatrix, divisor_index: int = -1
) -> AlphaRegModel:
    """Least squares on additive log-ratios, one fit per coordinate.

    The coefficient matrix is re-expressed against the first component so
    :func:`predict` reproduces the fits through the logit link regardless of
    which component served as the divisor. ``sigma_hat`` is the unbiased
    residual covariance on the alr scale actually regressed.
    """
    if Y.has_zeros():
        raise ZeroPart(
            "response batch contains zeros; impute them first or fit the "
            "power-parameter regression with alpha > 0"
        )
    _check_fit_shapes(Y, X)
    A = alr_batch(Y, divisor_index)
    gamma, *_ = np.linalg.lstsq(X.values, A, rcond=None)
    resid = A - X.values @ gamma
    sigma = resid.T @ resid / (Y.n - X.p - 1)

    divisor = divisor_index if divisor_index >= 0 else Y.D + divisor_index
    full = np.zeros((X.p + 1, Y.D))
    keep = [j for j in range(Y.D) if j != divisor]
    full[:, keep] = gamma
    coefficients = (full[:, 1:] - full[:, [0]]).T

    fitted = inverse_alr_batch(X.values @ gamma, divisor, Y.labels)
    objective = _ilr_profile_objective(
        _ilr_coords(Y.parts), _ilr_coords(fitted.parts)
    ) + float(alpha_log_jacobian(Y, 0.0).sum())
    return AlphaRegModel(
        alpha=None,
        coefficients=coefficients,
        sigma_hat=sigma,
        objective_value=objective,
        component_labels=Y.labels,
        covariate_names=X.covariate_names,
    )


def _initial_coefficients(Y: CompositionBatch, X: DesignMatrix) -> np.ndarray:
    """Start the optimizer at the log-ratio solution (zeros replaced if needed)."""
    start = multiplicative_replace(Y, ImputeConfig()) if Y.has_zeros() else Y
    A = alr_batch(start, 0)  # first component as divisor = link reference
    gamma, *_ = np.linalg.lstsq(X.values, A, rcond=None)
    return gamma.T  # d x (p+1), already expressed against component 1


def fit_alpha_regression(
    Y: CompositionBatch, X: DesignMatrix, alpha: AlphaParam | float
) -> AlphaRegModel:
    """Maximize the profiled Gaussian objective of the power-family regression.

    The response and the link fits are both mapped through the power-family
    transform; the residual covariance is profiled out, leaving
    -(n/2) log det of the residual cross-product to maximize over the
    coefficient matrix. ``alpha == 0`` routes to the closed-form log-ratio
    fit, which is the exact zero limit.
    """
    a = _alpha_value(alpha)
    if a == 0.0:
        return fit_alr_regression(Y, X)
    _check_fit_shapes(Y, X)
    Y_a = alpha_transform_batch(Y, a).coords
    n, d = Y_a.shape

    def negative_objective(flat: np.ndarray) -> float:
        eta = X.values @ flat.reshape(d, X.p + 1).T
        M_a = _alpha_coords(_link_parts(eta), a)
        resid = Y_a - M_a
        cross = resid.T @ resid / n + _LOGDET_JITTER * np.eye(d)
        _, logdet = np.linalg.slogdet(cross)
        return 0.5 * n * logdet

    b0 = _initial_coefficients(Y, X).ravel()
    ncoef = b0.size
    result = optimize.minimize(
        negative_objective,
        b0,
        method="L-BFGS-B",
        options={
            "maxiter": 500 * ncoef,
            "maxfun": 500 * ncoef * (ncoef + 2),
            "ftol": _FTOL,
            "gtol": 1e-12,
        },
    )
    # never return anything worse than the starting point
    candidates = [(negative_objective(b0), b0), (float(result.fun), result.x)]
    best_val, best = min(candidates, key=lambda t: t[0])

    coefficients = best.reshape(d, X.p + 1)
    eta = X.values @ coefficients.T
    resid = Y_a - _alpha_coords(_link_parts(eta), a)
    sigma = resid.T @ resid / (n - X.p - 1)
    objective = float(-best_val - 0.5 * n * d)
    if not Y.has_zeros():
        objective += float(alpha_log_jacobian(Y, a).sum())
    return AlphaRegModel(
        alpha=AlphaParam(a),
        coefficients=coefficients,
        sigma_hat=sigma,
        objective_value=objective,
        component_labels=Y.labels,
        covariate_names=X.covariate_names,
        converged=bool(result.success),
    )


def profile_objective(
    Y: CompositionBatch, X: DesignMatrix, alpha: AlphaParam | float
) -> float:
    """Profile log-likelihood at the fitted coefficients for this alpha.

    Includes the transformation Jacobian so values are comparable across the
    grid; the Jacobian degenerates at the simplex boundary, so the response
    must be strictly positive (the divergence criterion handles zeros).
    """
    if Y.has_zeros():
        raise ZeroPart("the profile objective is undefined for zero parts")
    return fit_alpha_regression(Y, X, alpha).objective_value


@dataclass(frozen=True)
class AlphaSelection:
    """Grid search result; failed grid points carry NaN criterion values."""

    grid: tuple[float, ...]
    criterion_values: tuple[float, ...]
    chosen_alpha: AlphaParam
    criterion_kind: str
    failures: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.criterion_kind not in ("twice_kl", "profile_objective"):
            raise ConfigError(f"unknown criterion kind {self.criterion_kind!r}")
        if len(self.grid) != len(self.criterion_values):
            raise DimensionMismatch("grid and criterion lengths differ")
        values = np.asarray(self.criterion_values)
        finite = np.isfinite(values)
        if not finite.any():
            raise DataError("no grid point produced a criterion value")
        optimum = (
            np.nanmin(values) if self.criterion_kind == "twice_kl" else np.nanmax(values)
        )
        chosen_vals = [
            v
            for g, v in zip(self.grid, self.criterion_values)
            if g == self.chosen_alpha.value
        ]
        if not chosen_vals or chosen_vals[0] != optimum:
            raise DataError("chosen alpha does not attain the grid optimum")


def default_alpha_grid(has_zeros: bool, step: float = 0.01) -> tuple[float, ...]:
    """[-1, 1] by ``step`` for positive data; (0, 1] when zeros are present."""
    if has_zeros:
        k = int(round(1.0 / step))
        return tuple(round(i * step, 10) for i in range(1, k + 1))
    k = int(round(1.0 / step))
    return tuple(round(i * step, 10) for i in range(-k, k + 1))


def _select(
    Y: CompositionBatch,
    X: DesignMatrix,
    grid: Sequence[AlphaParam | float],
    kind: str,
    fit_batch: CompositionBatch | None,
) -> AlphaSelection:
    if len(grid) == 0:
        raise ConfigError("alpha grid is empty")
    fit_on = fit_batch if fit_batch is not None else Y
    if fit_on.parts.shape != Y.parts.shape:
        raise DimensionMismatch("fit batch and criterion batch shapes differ")
    values: list[float] = []
    failures: dict[int, str] = {}
    grid_vals = [_alpha_value(a) for a in grid]
    for i, a in enumerate(grid_vals):
        try:
            model = fit_alpha_regression(fit_on, X, a)
            if kind == "twice_kl":
                values.append(kl_fit_divergence(Y, predict(model, X)))
            else:
                values.append(model.objective_value)
        except (DataError, NumericError, np.linalg.LinAlgError) as exc:
            failures[i] = f"{type(exc).__name__}: {exc}"
            values.append(float("nan"))
    arr = np.asarray(values)
    if not np.isfinite(arr).any():
        raise DataError(
            f"every grid point failed; first failure: {failures.get(0, 'n/a')}"
        )
    optimum = np.nanmin(arr) if kind == "twice_kl" else np.nanmax(arr)
    candidates = [g for g, v in zip(grid_vals, values) if v == optimum]
    chosen = min(candidates, key=lambda g: (abs(g), g))
    return AlphaSelection(
        grid=tuple(grid_vals),
        criterion_values=tuple(values),
        chosen_alpha=AlphaParam(chosen),
        criterion_kind=kind,
        failures=failures,
    )


def select_alpha_by_kl(
    Y: CompositionBatch,
    X: DesignMatrix,
    grid: Sequence[AlphaParam | float],
    fit_batch: CompositionBatch | None = None,
) -> AlphaSelection:
    """Fit every grid alpha and pick the one minimizing twice the KL divergence.

    The divergence always compares fitted compositions against ``Y`` as given
    (the original, pre-imputation responses); pass ``fit_batch`` to train on a
    zero-imputed copy while still scoring against the originals. Ties break
    toward the alpha closest to zero.
    """
    return _select(Y, X, grid, "twice_kl", fit_batch)


def select_alpha_by_profile(
    Y: CompositionBatch, X: DesignMatrix, grid: Sequence[AlphaParam | float]
) -> AlphaSelection:
    """Pick the grid alpha maximizing the profile objective (zero-free data)."""
    if Y.has_zeros():
        raise ZeroPart("profile-objective selection is undefined for zero parts")
    return _select(Y, X, grid, "profile_objective", None)
