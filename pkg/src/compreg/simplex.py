"""Simplex geometry and transformations.

Compositions are nonnegative vectors that carry relative information only;
closure rescales them to sum to one. This module provides the closure
operation, the Helmert sub-matrix, the one-parameter power transformation
family (with the isometric log-ratio transform as its zero limit), the
additive log-ratio transform, inverses for all of them, and the twice
Kullback-Leibler fit divergence used for model comparison.

All operations are pure functions of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    AllZeroVector,
    AlphaIsZero,
    ConfigError,
    DimensionMismatch,
    FittedZero,
    InvalidDimension,
    LabelMismatch,
    NegativePart,
    OutOfRange,
    ZeroPart,
    ZeroWithNonpositiveAlpha,
)

CLOSURE_TOL = 1e-9

# roundoff slack when mapping coordinates back onto the simplex
_NEGATIVE_SLACK = 1e-12


def _check_labels(labels: Sequence[str] | None, D: int) -> tuple[str, ...] | None:
    if labels is None:
        return None
    labels = tuple(str(lbl) for lbl in labels)
    if len(labels) != D:
        raise DimensionMismatch(f"{len(labels)} labels for {D} components")
    return labels


def _closed_rows(raw: np.ndarray) -> np.ndarray:
    """Validate and close each row of a 2-d nonnegative array."""
    if raw.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array, got ndim={raw.ndim}")
    if raw.shape[1] < 2:
        raise InvalidDimension("a composition needs at least 2 components")
    if not np.all(np.isfinite(raw)):
        raise NegativePart("non-finite entries in compositional data")
    if np.any(raw < 0):
        raise NegativePart("negative entries in compositional data")
    sums = raw.sum(axis=1)
    if np.any(sums == 0):
        row = int(np.nonzero(sums == 0)[0][0])
        raise AllZeroVector(f"row {row} sums to zero")
    return raw / sums[:, None]


@dataclass(frozen=True)
class Composition:
    """A point on the simplex: D nonnegative parts summing to one.

    Raw parts are closed (divided by their sum) on construction, so any
    positive rescaling of the input yields the same composition.
    """

    parts: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        parts = np.asarray(self.parts, dtype=float).reshape(-1)
        parts = _closed_rows(parts[None, :])[0]
        parts.flags.writeable = False
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "labels", _check_labels(self.labels, parts.size))

    @property
    def D(self) -> int:
        return self.parts.size

    @property
    def d(self) -> int:
        return self.parts.size - 1

    def has_zeros(self) -> bool:
        return bool(np.any(self.parts == 0))


@dataclass(frozen=True)
class CompositionBatch:
    """An n x D matrix of compositions sharing component labels."""

    parts: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        parts = np.asarray(self.parts, dtype=float)
        if parts.ndim == 1:
            parts = parts[None, :]
        parts = _closed_rows(parts)
        if parts.shape[0] < 1:
            raise DimensionMismatch("a batch needs at least one row")
        parts.flags.writeable = False
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "labels", _check_labels(self.labels, parts.shape[1]))

    @classmethod
    def from_rows(cls, rows: Iterable[Composition]) -> "CompositionBatch":
        rows = list(rows)
        if not rows:
            raise DimensionMismatch("empty batch")
        labels = rows[0].labels
        D = rows[0].D
        for r in rows[1:]:
            if r.D != D:
                raise DimensionMismatch("rows differ in component count")
            if r.labels != labels:
                raise LabelMismatch("rows differ in component labels")
        return cls(np.vstack([r.parts for r in rows]), labels)

    @property
    def n(self) -> int:
        return self.parts.shape[0]

    @property
    def D(self) -> int:
        return self.parts.shape[1]

    @property
    def d(self) -> int:
        return self.parts.shape[1] - 1

    def row(self, i: int) -> Composition:
        return Composition(self.parts[i], self.labels)

    def has_zeros(self) -> bool:
        return bool(np.any(self.parts == 0))


@dataclass(frozen=True)
class AlphaParam:
    """Power parameter of the transformation family, restricted to [-1, 1]."""

    value: float

    def __post_init__(self):
        value = float(self.value)
        if not np.isfinite(value) or not -1.0 <= value <= 1.0:
            raise ConfigError(f"alpha must lie in [-1, 1], got {value}")
        object.__setattr__(self, "value", value)


def _alpha_value(alpha: "AlphaParam | float") -> float:
    if isinstance(alpha, AlphaParam):
        return alpha.value
    return AlphaParam(float(alpha)).value


@dataclass(frozen=True)
class TransformedBatch:
    """Coordinates of a batch in R^d; ``alpha=None`` marks the ilr limit."""

    coords: np.ndarray
    alpha: AlphaParam | None
    source_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2:
            raise DimensionMismatch("coords must be 2-d")
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]


# -- closure and the Helmert sub-matrix ---------------------------------------

def close(raw, labels: Sequence[str] | None = None) -> Composition:
    """Close a raw nonnegative vector to a composition (divide by its sum)."""
    return Composition(np.asarray(raw, dtype=float), _check_labels(labels, len(raw)))


def close_batch(raw, labels: Sequence[str] | None = None) -> CompositionBatch:
    """Close each row of a raw nonnegative matrix."""
    arr = np.asarray(raw, dtype=float)
    return CompositionBatch(arr, _check_labels(labels, arr.shape[-1]))


@lru_cache(maxsize=None)
def helmert_submatrix(D: int) -> np.ndarray:
    """The (D-1) x D Helmert matrix with its constant first row removed.

    Row k (1-based) is (1, ..., 1, -k, 0, ..., 0) / sqrt(k (k+1)) with k
    leading ones. Rows are orthonormal and sum to zero, so H maps centered
    D-vectors to D-1 coordinates isometrically.
    """
    if not isinstance(D, (int, np.integer)) or D < 2:
        raise InvalidDimension(f"Helmert sub-matrix needs integer D >= 2, got {D}")
    H = np.zeros((D - 1, D))
    for k in range(1, D):
        scale = 1.0 / np.sqrt(k * (k + 1.0))
        H[k - 1, :k] = scale
        H[k - 1, k] = -k * scale
    H.flags.writeable = False
    return H


# -- the power-parameter family ------------------------------------------------

def _check_alpha_for(parts: np.ndarray, a: float) -> None:
    if a <= 0 and np.any(parts == 0):
        raise ZeroWithNonpositiveAlpha(
            "zero parts require a strictly positive alpha"
        )


def _power_rows(parts: np.ndarray, a: float) -> np.ndarray:
    powered = parts ** a
    return powered / powered.sum(axis=1)[:, None]


def _alpha_coords(parts: np.ndarray, a: float) -> np.ndarray:
    D = parts.shape[1]
    u = _power_rows(parts, a)
    return (D * u - 1.0) @ helmert_submatrix(D).T / a


def power_transform(x: Composition, alpha: AlphaParam | float) -> Composition:
    """Raise each part to the power alpha and re-close; stays on the simplex."""
    a = _alpha_value(alpha)
    _check_alpha_for(x.parts, a)
    return Composition(_power_rows(x.parts[None, :], a)[0], x.labels)


def alpha_transform(x: Composition, alpha: AlphaParam | float) -> np.ndarray:
    """Map a composition to R^(D-1) through the power transformation family.

    The coordinates are H (D u - 1) / alpha with u the power-transformed
    composition; as alpha tends to zero they converge to ``ilr(x)``, which
    must be called explicitly for the limit.
    """
    a = _alpha_value(alpha)
    if a == 0.0:
        raise AlphaIsZero("alpha = 0 is the ilr limit; call ilr() instead")
    _check_alpha_for(x.parts, a)
    return _alpha_coords(x.parts[None, :], a)[0]


def alpha_transform_batch(
    batch: CompositionBatch, alpha: AlphaParam | float
) -> TransformedBatch:
    """Apply the power-family transform to every row of a batch."""
    a = _alpha_value(alpha)
    if a == 0.0:
        raise AlphaIsZero("alpha = 0 is the ilr limit; call ilr_batch() instead")
    _check_alpha_for(batch.parts, a)
    return TransformedBatch(_alpha_coords(batch.parts, a), AlphaParam(a), batch.labels)


def _inverse_alpha_rows(
    coords: np.ndarray, a: float
) -> np.ndarray:
    D = coords.shape[1] + 1
    u = (a * (coords @ helmert_submatrix(D)) + 1.0) / D
    low = u.min()
    if low < -_NEGATIVE_SLACK:
        raise OutOfRange(
            f"coordinates map outside the simplex (min power part {low:.3e})"
        )
    u = np.clip(u, 0.0, None)
    if a < 0 and np.any(u == 0):
        raise OutOfRange("zero power part cannot be inverted for negative alpha")
    x = u ** (1.0 / a)
    return x / x.sum(axis=1)[:, None]


def inverse_alpha_transform(
    z, alpha: AlphaParam | float, labels: Sequence[str] | None = None
) -> Composition:
    """Invert :func:`alpha_transform`; raises OutOfRange off the image."""
    a = _alpha_value(alpha)
    if a == 0.0:
        raise AlphaIsZero("alpha = 0 is the ilr limit; call inverse_ilr() instead")
    z = np.asarray(z, dtype=float).reshape(-1)
    return Composition(_inverse_alpha_rows(z[None, :], a)[0], labels)


def inverse_alpha_transform_batch(
    coords, alpha: AlphaParam | float, labels: Sequence[str] | None = None
) -> CompositionBatch:
    a = _alpha_value(alpha)
    if a == 0.0:
        raise AlphaIsZero("alpha = 0 is the ilr limit; call inverse_ilr_batch() instead")
    coords = np.asarray(coords, dtype=float)
    return CompositionBatch(_inverse_alpha_rows(coords, a), labels)


# -- log-ratio transforms --------------------------------------------------------

def _require_positive(parts: np.ndarray) -> None:
    if np.any(parts == 0):
        raise ZeroPart("log-ratio transforms need strictly positive parts")


def _ilr_coords(parts: np.ndarray) -> np.ndarray:
    logs = np.log(parts)
    centered = logs - logs.mean(axis=1)[:, None]
    return centered @ helmert_submatrix(parts.shape[1]).T


def ilr(x: Composition) -> np.ndarray:
    """Isometric log-ratio coordinates: H applied to the centered log parts."""
    _require_positive(x.parts)
    return _ilr_coords(x.parts[None, :])[0]


def ilr_batch(batch: CompositionBatch) -> TransformedBatch:
    _require_positive(batch.parts)
    return TransformedBatch(_ilr_coords(batch.parts), None, batch.labels)


def inverse_ilr(v, labels: Sequence[str] | None = None) -> Composition:
    """Invert ilr: close exp(H^T v)."""
    v = np.asarray(v, dtype=float).reshape(-1)
    return Composition(np.exp(v @ helmert_submatrix(v.size + 1)), labels)


def inverse_ilr_batch(coords, labels: Sequence[str] | None = None) -> CompositionBatch:
    coords = np.asarray(coords, dtype=float)
    return CompositionBatch(np.exp(coords @ helmert_submatrix(coords.shape[1] + 1)), labels)


def _resolve_divisor(D: int, divisor_index: int) -> int:
    idx = divisor_index if divisor_index >= 0 else D + divisor_index
    if not 0 <= idx < D:
        raise DimensionMismatch(f"divisor index {divisor_index} invalid for D={D}")
    return idx


def _alr_coords(parts: np.ndarray, idx: int) -> np.ndarray:
    keep = [j for j in range(parts.shape[1]) if j != idx]
    return np.log(parts[:, keep] / parts[:, idx][:, None])


def alr(x: Composition, divisor_index: int = -1) -> np.ndarray:
    """Additive log-ratio coordinates log(x_i / x_divisor), divisor skipped."""
    _require_positive(x.parts)
    return _alr_coords(x.parts[None, :], _resolve_divisor(x.D, divisor_index))[0]


def alr_batch(batch: CompositionBatch, divisor_index: int = -1) -> np.ndarray:
    _require_positive(batch.parts)
    return _alr_coords(batch.parts, _resolve_divisor(batch.D, divisor_index))


def _inverse_alr_rows(Z: np.ndarray, idx: int) -> np.ndarray:
    n, d = Z.shape
    full = np.ones((n, d + 1))
    keep = [j for j in range(d + 1) if j != idx]
    full[:, keep] = np.exp(Z)
    return full / full.sum(axis=1)[:, None]


def inverse_alr(z, divisor_index: int = -1, labels: Sequence[str] | None = None) -> Composition:
    """Invert alr: insert 1 at the divisor slot of exp(z), then close."""
    z = np.asarray(z, dtype=float).reshape(-1)
    idx = _resolve_divisor(z.size + 1, divisor_index)
    return Composition(_inverse_alr_rows(z[None, :], idx)[0], labels)


def inverse_alr_batch(
    Z, divisor_index: int = -1, labels: Sequence[str] | None = None
) -> CompositionBatch:
    Z = np.asarray(Z, dtype=float)
    idx = _resolve_divisor(Z.shape[1] + 1, divisor_index)
    return CompositionBatch(_inverse_alr_rows(Z, idx), labels)


def alpha_log_jacobian(batch: CompositionBatch, alpha: AlphaParam | float) -> np.ndarray:
    """Per-row log absolute Jacobian determinant of the power-family transform.

    Computed in the chart that drops the last part; ``alpha = 0`` gives the
    ilr limit. Needed whenever transformed-scale likelihoods are compared
    across different values of the power parameter. Degenerates at the
    simplex boundary, so parts must be strictly positive.
    """
    a = _alpha_value(alpha)
    _require_positive(batch.parts)
    D = batch.D
    H = helmert_submatrix(D)
    chart = H[:, :-1] - H[:, [-1]]
    const = (D - 1) * np.log(D) + np.log(abs(np.linalg.det(chart)))
    if a == 0.0:
        log_s = np.full(batch.n, np.log(D))
    else:
        log_s = np.log((batch.parts**a).sum(axis=1))
    return const + (a - 1.0) * np.log(batch.parts).sum(axis=1) - D * log_s


# -- fit divergence ---------------------------------------------------------------

def kl_fit_divergence(observed: CompositionBatch, fitted: CompositionBatch) -> float:
    """Twice the Kullback-Leibler divergence of fitted from observed parts.

    Sums 2 y log(y / yhat) over all cells with the convention
    0 log(0 / yhat) = 0, so observed zeros are allowed. Nonnegative, and zero
    exactly when the batches agree on all positive parts.
    """
    if observed.parts.shape != fitted.parts.shape:
        raise DimensionMismatch(
            f"observed {observed.parts.shape} vs fitted {fitted.parts.shape}"
        )
    if (
        observed.labels is not None
        and fitted.labels is not None
        and observed.labels != fitted.labels
    ):
        raise LabelMismatch("observed and fitted component labels differ")
    y = observed.parts
    yhat = fitted.parts
    mask = y > 0
    if np.any(yhat[mask] == 0):
        raise FittedZero("fitted part is zero where the observed part is positive")
    terms = y[mask] * (np.log(y[mask]) - np.log(yhat[mask]))
    return float(2.0 * terms.sum())
