"""Principal component regression with compositional predictors.

The pipeline transforms the compositional block through the power family (ilr
at zero), standardizes the coordinates, eigen-decomposes their cross-product,
and regresses the scalar response on the leading scores, optionally together
with reference-coded dummies for a categorical covariate. The power parameter
and the number of retained components are picked by seeded, stratified
k-fold cross-validation on mean squared prediction error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .exceptions import (
    ConfigError,
    DegenerateVariance,
    DimensionMismatch,
    FoldTooSmall,
    LabelMismatch,
    SingularScores,
    TooFewRows,
    UnknownFactorLevel,
)
from .simplex import (
    AlphaParam,
    CompositionBatch,
    alpha_transform_batch,
    ilr_batch,
    _alpha_value,
)


def _transform_coords(batch: CompositionBatch, a: float) -> np.ndarray:
    if a == 0.0:
        return ilr_batch(batch).coords
    return alpha_transform_batch(batch, a).coords


@dataclass(frozen=True)
class Standardizer:
    """Column means and standard deviations frozen from the training block."""

    means: np.ndarray
    sds: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        means = X.mean(axis=0)
        sds = X.std(axis=0, ddof=1)
        if np.any(sds <= 0) or not np.all(np.isfinite(sds)):
            raise SingularScores("a transformed predictor column is constant")
        return cls(means, sds)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.means) / self.sds


@dataclass(frozen=True)
class FactorEncoding:
    """Reference-cell dummy coding with a fixed level order."""

    levels: tuple[str, ...]
    reference: str

    @classmethod
    def from_labels(
        cls, labels: Sequence[str], reference: str | None = None
    ) -> "FactorEncoding":
        levels = tuple(sorted(set(str(l) for l in labels)))
        if len(levels) < 2:
            raise ConfigError("a factor needs at least two levels")
        ref = str(reference) if reference is not None else levels[-1]
        if ref not in levels:
            raise UnknownFactorLevel(f"reference level {ref!r} not among {levels}")
        return cls(levels, ref)

    @property
    def dummy_levels(self) -> tuple[str, ...]:
        return tuple(l for l in self.levels if l != self.reference)

    def encode(self, labels: Sequence[str]) -> np.ndarray:
        labels = [str(l) for l in labels]
        unknown = set(labels) - set(self.levels)
        if unknown:
            raise UnknownFactorLevel(f"unseen factor levels: {sorted(unknown)}")
        columns = self.dummy_levels
        out = np.zeros((len(labels), len(columns)))
        index = {l: j for j, l in enumerate(columns)}
        for i, l in enumerate(labels):
            if l != self.reference:
                out[i, index[l]] = 1.0
        return out


@dataclass(frozen=True)
class PcrModel:
    """Standardization, rotation, and score-regression coefficients.

    ``eigenvectors`` holds all p columns in descending-eigenvalue order with
    signs fixed so each column's largest-magnitude entry is positive;
    ``coefficients`` covers intercept, the first k scores, and any factor
    dummies, in that order. ``coef_covariance`` is the score-route covariance
    of the mapped-back coefficients, kept for completeness but unused by
    prediction.
    """

    alpha: AlphaParam | None
    standardizer: Standardizer
    eigenvectors: np.ndarray
    eigenvalues: np.ndarray
    k: int
    coefficients: np.ndarray
    coef_names: tuple[str, ...]
    sigma2: float
    factor: FactorEncoding | None = None
    component_labels: tuple[str, ...] | None = None
    coef_covariance: np.ndarray | None = None

    @property
    def alpha_value(self) -> float:
        return 0.0 if self.alpha is None else self.alpha.value

    @property
    def n_predictors(self) -> int:
        dummies = 0 if self.factor is None else len(self.factor.dummy_levels)
        return self.k + dummies


def _fix_signs(V: np.ndarray) -> np.ndarray:
    out = V.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


def _principal_axes(Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cross = Xs.T @ Xs
    eigenvalues, V = np.linalg.eigh(cross)
    order = np.argsort(eigenvalues)[::-1]
    return eigenvalues[order], _fix_signs(V[:, order])


def _score_design(
    scores: np.ndarray, encoding: FactorEncoding | None, labels: Sequence[str] | None
) -> np.ndarray:
    parts = [np.ones((scores.shape[0], 1)), scores]
    if encoding is not None:
        if labels is None:
            raise ConfigError("model uses a factor; per-row levels are required")
        parts.append(encoding.encode(labels))
    return np.hstack(parts)


def pcr_fit(
    y,
    Xcomp: CompositionBatch,
    alpha: AlphaParam | float,
    k: int,
    factor: Sequence[str] | None = None,
    reference: str | None = None,
) -> PcrModel:
    """Fit the transform -> standardize -> rotate -> regress pipeline.

    Keeps the first ``k`` principal scores of the standardized coordinates as
    predictors; with ``k`` equal to the full dimension the fitted values are
    those of ordinary least squares on the standardized coordinates.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    a = _alpha_value(alpha)
    if y.size != Xcomp.n:
        raise DimensionMismatch(f"{y.size} responses vs {Xcomp.n} predictor rows")
    coords = _transform_coords(Xcomp, a)
    p = coords.shape[1]
    if not 1 <= k <= p:
        raise ConfigError(f"k must be in [1, {p}], got {k}")
    encoding = FactorEncoding.from_labels(factor, reference) if factor is not None else None
    n_params = 1 + k + (len(encoding.dummy_levels) if encoding else 0)
    if y.size <= n_params:
        raise TooFewRows(f"need more than {n_params} rows, got {y.size}")

    standardizer = Standardizer.fit(coords)
    Xs = standardizer.apply(coords)
    eigenvalues, V = _principal_axes(Xs)
    scores = Xs @ V[:, :k]
    W = _score_design(scores, encoding, factor)
    if np.linalg.matrix_rank(W) < W.shape[1]:
        raise SingularScores("score design is rank deficient")
    coef, *_ = np.linalg.lstsq(W, y, rcond=None)
    resid = y - W @ coef
    sigma2 = float(resid @ resid / (y.size - W.shape[1]))

    ZtZ_inv = np.linalg.inv(scores.T @ scores)
    coef_covariance = sigma2 * V[:, :k] @ ZtZ_inv @ V[:, :k].T

    names = ["intercept"] + [f"PC{i + 1}" for i in range(k)]
    if encoding is not None:
        names += list(encoding.dummy_levels)
    return PcrModel(
        alpha=None if a == 0.0 else AlphaParam(a),
        standardizer=standardizer,
        eigenvectors=V,
        eigenvalues=eigenvalues,
        k=int(k),
        coefficients=coef,
        coef_names=tuple(names),
        sigma2=sigma2,
        factor=encoding,
        component_labels=Xcomp.labels,
        coef_covariance=coef_covariance,
    )


def pcr_predict(
    model: PcrModel, Xcomp_new: CompositionBatch, factor_new: Sequence[str] | None = None
) -> np.ndarray:
    """Apply the stored pipeline to new compositional rows."""
    if (
        model.component_labels is not None
        and Xcomp_new.labels is not None
        and model.component_labels != Xcomp_new.labels
    ):
        raise LabelMismatch(
            f"model components {model.component_labels} vs data {Xcomp_new.labels}"
        )
    coords = _transform_coords(Xcomp_new, model.alpha_value)
    if coords.shape[1] != model.eigenvectors.shape[0]:
        raise DimensionMismatch("component count differs from the training data")
    scores = model.standardizer.apply(coords) @ model.eigenvectors[:, : model.k]
    W = _score_design(scores, model.factor, factor_new)
    return W @ model.coefficients


def adjusted_r2(y, fitted, n_predictors: int) -> float:
    """Coefficient of determination penalized for the predictor count."""
    y = np.asarray(y, dtype=float).reshape(-1)
    fitted = np.asarray(fitted, dtype=float).reshape(-1)
    n = y.size
    if n <= n_predictors + 1:
        raise TooFewRows(f"need more than {n_predictors + 1} rows, got {n}")
    tss = float(((y - y.mean()) ** 2).sum())
    if tss == 0.0:
        raise DegenerateVariance("response is constant")
    rss = float(((y - fitted) ** 2).sum())
    r2 = 1.0 - rss / tss
    return 1.0 - (1.0 - r2) * (n - 1) / (n - n_predictors - 1)


def standardized_residuals(
    model: PcrModel,
    y,
    Xcomp: CompositionBatch,
    factor: Sequence[str] | None = None,
    flag_at: float = 2.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Internally studentized residuals and their outlier flags.

    Each residual is scaled by sqrt(sigma2 (1 - leverage)); values beyond
    ``flag_at`` in absolute value are flagged.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    coords = _transform_coords(Xcomp, model.alpha_value)
    scores = model.standardizer.apply(coords) @ model.eigenvectors[:, : model.k]
    W = _score_design(scores, model.factor, factor)
    resid = y - W @ model.coefficients
    leverage = np.einsum("ij,ji->i", W, np.linalg.solve(W.T @ W, W.T))
    denom = np.sqrt(np.clip(model.sigma2 * (1.0 - leverage), 0.0, None))
    tiny = 1e-12 * (1.0 + float(np.sqrt(np.mean(y**2))))
    out = np.zeros_like(resid)
    np.divide(resid, denom, out=out, where=denom > tiny)
    return out, np.abs(out) > flag_at


class CvCell(NamedTuple):
    alpha: float
    k: int
    fold_mspes: tuple[float, ...]
    mean_mspe: float


@dataclass(frozen=True)
class CvReport:
    """Grid of (alpha, k) cells with per-fold and mean prediction error."""

    cells: tuple[CvCell, ...]
    chosen_alpha: float
    chosen_k: int
    folds: int
    seed: int

    @property
    def chosen_cell(self) -> CvCell:
        for cell in self.cells:
            if cell.alpha == self.chosen_alpha and cell.k == self.chosen_k:
                return cell
        raise KeyError("chosen cell missing from the grid")


def assign_folds(
    n: int, folds: int, seed: int, factor: Sequence[str] | None = None
) -> np.ndarray:
    """Deterministic fold labels, stratified by factor level when given."""
    if folds < 2:
        raise ConfigError("need at least 2 folds")
    if folds > n:
        raise FoldTooSmall(f"{folds} folds for {n} rows")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=int)
    if factor is None:
        order = rng.permutation(n)
        assignment[order] = np.arange(n) % folds
        return assignment
    labels = [str(l) for l in factor]
    if len(labels) != n:
        raise DimensionMismatch(f"{len(labels)} factor labels for {n} rows")
    position = 0
    for level in sorted(set(labels)):
        idx = np.array([i for i, l in enumerate(labels) if l == level])
        if idx.size < 2:
            raise FoldTooSmall(
                f"factor level {level!r} has {idx.size} row(s); "
                "every level needs at least 2 so each training split covers it"
            )
        idx = idx[rng.permutation(idx.size)]
        for i in idx:
            assignment[i] = position % folds
            position += 1
    return assignment


def cross_validate(
    y,
    Xcomp: CompositionBatch,
    alpha_grid: Sequence[AlphaParam | float],
    k_grid: Sequence[int],
    factor: Sequence[str] | None = None,
    folds: int = 10,
    seed: int = 0,
    reference: str | None = None,
    stratify_by: Sequence[str] | None = None,
) -> CvReport:
    """Grid search (alpha, k) by k-fold mean squared prediction error.

    Fold assignment is a pure function of (seed, folds, stratification
    labels); it stratifies by the model factor when one is supplied, or by
    ``stratify_by`` to stratify without putting the labels in the model. The
    whole pipeline, standardization and eigenvectors included, is refit on
    every training split. Ties break toward fewer components, then the alpha
    closest to zero.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(alpha_grid) == 0 or len(k_grid) == 0:
        raise ConfigError("alpha and k grids must be nonempty")
    labels = None if factor is None else [str(l) for l in factor]
    strata = [str(l) for l in stratify_by] if stratify_by is not None else labels
    assignment = assign_folds(y.size, folds, seed, strata)

    cells = []
    for a in [_alpha_value(g) for g in alpha_grid]:
        for k in k_grid:
            fold_mspes = []
            for fold in range(folds):
                test = assignment == fold
                train = ~test
                train_batch = CompositionBatch(Xcomp.parts[train], Xcomp.labels)
                test_batch = CompositionBatch(Xcomp.parts[test], Xcomp.labels)
                train_factor = [l for l, t in zip(labels, train) if t] if labels else None
                test_factor = [l for l, t in zip(labels, test) if t] if labels else None
                model = pcr_fit(
                    y[train], train_batch, a, int(k), train_factor, reference
                )
                pred = pcr_predict(model, test_batch, test_factor)
                fold_mspes.append(float(np.mean((y[test] - pred) ** 2)))
            cells.append(
                CvCell(a, int(k), tuple(fold_mspes), float(np.mean(fold_mspes)))
            )

    best = min(cells, key=lambda c: (c.mean_mspe, c.k, abs(c.alpha), c.alpha))
    return CvReport(
        cells=tuple(cells),
        chosen_alpha=best.alpha,
        chosen_k=best.k,
        folds=int(folds),
        seed=int(seed),
    )
