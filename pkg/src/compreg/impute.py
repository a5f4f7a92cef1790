"""Zero replacement for compositional batches.

Log-ratio methods need strictly positive parts. Zeros are first replaced by a
fraction (default 65%) of a per-component detection limit, with the nonzero
parts of the row shrunk multiplicatively so it still sums to one. An EM pass
then refines each replaced cell toward its conditional expectation under a
Gaussian model of the log-ratio coordinates, truncated so the refined part
stays below the replacement threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import (
    AllZeroComponent,
    ConfigError,
    DimensionMismatch,
    ReplacementExceedsUnity,
    SingularCovariance,
)
from .simplex import CompositionBatch, helmert_submatrix

_RIDGE = 1e-8
# keep refined parts strictly below their cap
_CAP_MARGIN = 1.0 - 1e-6


@dataclass(frozen=True)
class ImputeConfig:
    """Replacement thresholds and EM stopping rule.

    ``detection_limits`` are on the closed (proportion) scale; when omitted
    they are taken as the smallest positive observed value per component.
    ``em_tolerance`` applies to the maximum absolute change of the imputed
    parts between successive iterations.
    """

    threshold_fraction: float = 0.65
    detection_limits: np.ndarray | None = None
    em_tolerance: float = 0.01
    max_iterations: int = 100

    def __post_init__(self):
        if not 0.0 < self.threshold_fraction < 1.0:
            raise ConfigError("threshold_fraction must be in (0, 1)")
        if self.em_tolerance <= 0:
            raise ConfigError("em_tolerance must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if self.detection_limits is not None:
            limits = np.asarray(self.detection_limits, dtype=float)
            if np.any(limits <= 0):
                raise ConfigError("detection limits must be positive")
            object.__setattr__(self, "detection_limits", limits)


class ChangedCell(NamedTuple):
    row: int
    component: int
    old: float
    new: float


@dataclass(frozen=True)
class ImputeResult:
    """Imputed batch plus a log of every originally-zero cell."""

    batch: CompositionBatch
    iterations: int
    changed_cells: list[ChangedCell] = field(default_factory=list)
    converged: bool = True
    ridge_applied: bool = False


def detect_limits(batch: CompositionBatch) -> np.ndarray:
    """Smallest strictly positive observed value of each component."""
    parts = batch.parts
    limits = np.empty(batch.D)
    for j in range(batch.D):
        positive = parts[parts[:, j] > 0, j]
        if positive.size == 0:
            raise AllZeroComponent(f"component {j} is zero in every row")
        limits[j] = positive.min()
    return limits


def _resolve_limits(batch: CompositionBatch, config: ImputeConfig) -> np.ndarray:
    if config.detection_limits is not None:
        limits = config.detection_limits
        if limits.shape != (batch.D,):
            raise DimensionMismatch(
                f"{limits.size} detection limits for {batch.D} components"
            )
        return limits
    return detect_limits(batch)


def multiplicative_replace(
    batch: CompositionBatch, config: ImputeConfig | None = None
) -> CompositionBatch:
    """Replace zeros by threshold_fraction * limit, shrinking the rest of the row.

    Rows without zeros are returned unchanged; each replaced row keeps the
    mutual ratios of its nonzero parts.
    """
    config = config or ImputeConfig()
    zero_mask = batch.parts == 0
    if not zero_mask.any():
        return batch
    limits = _resolve_limits(batch, config)
    parts = batch.parts.copy()
    for i in np.nonzero(zero_mask.any(axis=1))[0]:
        zeros = zero_mask[i]
        repl = config.threshold_fraction * limits[zeros]
        total = repl.sum()
        if total >= 1.0:
            raise ReplacementExceedsUnity(f"row {i}: replacements sum to {total:.4f}")
        parts[i, ~zeros] *= 1.0 - total
        parts[i, zeros] = repl
    return CompositionBatch(parts, batch.labels)


def _fit_gaussian(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Mean and covariance of the log-ratio coordinates, ridged if singular."""
    if coords.shape[0] < 2:
        raise SingularCovariance("need at least 2 rows to estimate a covariance")
    mean = coords.mean(axis=0)
    cov = np.atleast_2d(np.cov(coords, rowvar=False, ddof=1))
    if not np.all(np.isfinite(cov)):
        raise SingularCovariance("covariance estimate is not finite")
    try:
        np.linalg.cholesky(cov)
        return mean, cov, False
    except np.linalg.LinAlgError:
        ridged = cov + _RIDGE * np.eye(cov.shape[0])
        try:
            np.linalg.cholesky(ridged)
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance("covariance singular even after ridge") from exc
        return mean, ridged, True


def _alr_from_ilr_map(D: int, divisor: int) -> np.ndarray:
    """Linear map taking ilr coordinates to alr coordinates with the given divisor."""
    HT = helmert_submatrix(D).T  # D x d, row i is the clr loading of component i
    keep = [i for i in range(D) if i != divisor]
    return HT[keep, :] - HT[divisor, :]


def em_impute(batch: CompositionBatch, config: ImputeConfig | None = None) -> ImputeResult:
    """Refine multiplicative replacements by conditional Gaussian expectations.

    Iterates: transform the current batch to ilr coordinates, fit mean and
    covariance, replace each originally-zero cell by its conditional
    expectation given the row's observed coordinates (computed in the alr
    basis whose divisor is the row's largest observed part), truncated so the
    part stays below threshold_fraction times its detection limit, and map
    back to the simplex. Stops when imputed parts move less than
    ``em_tolerance`` or ``max_iterations`` is reached.
    """
    config = config or ImputeConfig()
    zero_mask = batch.parts == 0
    if not zero_mask.any():
        return ImputeResult(batch, 0)

    limits = _resolve_limits(batch, config)
    caps = config.threshold_fraction * limits
    zero_rows = np.nonzero(zero_mask.any(axis=1))[0]
    # fixed per row: the largest originally-observed part anchors the alr basis
    divisors = {int(r): int(np.argmax(batch.parts[r])) for r in zero_rows}
    alr_maps = {c: _alr_from_ilr_map(batch.D, c) for c in set(divisors.values())}

    current = multiplicative_replace(batch, config).parts.copy()
    H = helmert_submatrix(batch.D)
    converged = False
    ridge_applied = False
    iterations = 0

    for _ in range(config.max_iterations):
        logs = np.log(current)
        coords = (logs - logs.mean(axis=1)[:, None]) @ H.T
        mean, cov, ridged = _fit_gaussian(coords)
        ridge_applied = ridge_applied or ridged

        new = current.copy()
        for r in zero_rows:
            c = divisors[int(r)]
            M = alr_maps[c]
            z = M @ coords[r]
            mz = M @ mean
            Sz = M @ cov @ M.T
            keep = [i for i in range(batch.D) if i != c]
            miss = [k for k, i in enumerate(keep) if zero_mask[r, i]]
            obs = [k for k in range(len(keep)) if k not in miss]
            if obs:
                rhs = z[obs] - mz[obs]
                sol = np.linalg.solve(Sz[np.ix_(obs, obs)], rhs)
                z_cond = mz[miss] + Sz[np.ix_(miss, obs)] @ sol
            else:
                z_cond = mz[miss]

            z_new = z.copy()
            z_new[miss] = z_cond
            expz = np.exp(z_new)
            row_candidate = np.insert(expz, c, 1.0)
            row_candidate /= row_candidate.sum()

            zero_comps = np.nonzero(zero_mask[r])[0]
            targets = np.minimum(row_candidate[zero_comps], _CAP_MARGIN * caps[zero_comps])
            observed = ~zero_mask[r]
            new[r, observed] = batch.parts[r, observed] * (1.0 - targets.sum())
            new[r, zero_comps] = targets

        delta = np.max(np.abs(new[zero_mask] - current[zero_mask]))
        current = new
        iterations += 1
        if delta < config.em_tolerance:
            converged = True
            break

    changed = [
        ChangedCell(int(r), int(c), 0.0, float(current[r, c]))
        for r, c in zip(*np.nonzero(zero_mask))
    ]
    return ImputeResult(
        CompositionBatch(current, batch.labels),
        iterations,
        changed,
        converged,
        ridge_applied,
    )
