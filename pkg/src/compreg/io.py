"""Data ingestion, grid parsing, model persistence, and atomic artifacts.

CSV files are comma-separated with a header row and "." decimals. Column
roles are given as ``role=col,...;role=...`` groups; ``a:c`` ranges expand in
header order. Model JSON and report CSVs serialize doubles through ``repr``,
the shortest string that round-trips exactly, so saved artifacts are both
diffable and bit-faithful.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import (
    ConfigError,
    DataError,
    EmptyData,
    MissingColumn,
    ParseError,
)
from .pcr import FactorEncoding, PcrModel, Standardizer
from .regression import AlphaRegModel, DesignMatrix
from .simplex import AlphaParam, CompositionBatch

ROLES = ("composition", "response", "covariate", "logcovariate", "factor", "ignore")
_NUMERIC_ROLES = ("composition", "response", "covariate", "logcovariate")


def parse_roles(spec: str, header: Sequence[str]) -> dict[str, str]:
    """Map each column name to a role from a ``role=cols;...`` spec string."""
    header = list(header)
    roles: dict[str, str] = {}
    for group in filter(None, (g.strip() for g in spec.split(";"))):
        if "=" not in group:
            raise ConfigError(f"role group {group!r} is not of the form role=columns")
        role, _, cols = group.partition("=")
        role = role.strip().lower()
        if role not in ROLES:
            raise ConfigError(f"unknown role {role!r}; expected one of {ROLES}")
        for token in filter(None, (t.strip() for t in cols.split(","))):
            if ":" in token:
                first, _, last = token.partition(":")
                first, last = first.strip(), last.strip()
                for name in (first, last):
                    if name not in header:
                        raise MissingColumn(f"column {name!r} not in header")
                i, j = header.index(first), header.index(last)
                if i > j:
                    raise ConfigError(f"range {token!r} runs backwards in the header")
                expanded = header[i : j + 1]
            else:
                if token not in header:
                    raise MissingColumn(f"column {token!r} not in header")
                expanded = [token]
            for name in expanded:
                if name in roles and roles[name] != role:
                    raise ConfigError(f"column {name!r} assigned two roles")
                roles[name] = role
    for name in header:
        roles.setdefault(name, "ignore")
    return roles


@dataclass(frozen=True)
class Dataset:
    """Parsed table plus role tags; typed accessors build model inputs."""

    columns: dict[str, list]
    roles: dict[str, str]
    header: tuple[str, ...]

    @property
    def n(self) -> int:
        return len(self.columns[self.header[0]]) if self.header else 0

    def _names(self, role: str) -> list[str]:
        return [c for c in self.header if self.roles.get(c) == role]

    @property
    def composition_labels(self) -> tuple[str, ...]:
        return tuple(self._names("composition"))

    def composition_batch(self) -> CompositionBatch:
        names = self._names("composition")
        if len(names) < 2:
            raise ConfigError("need at least 2 composition columns")
        raw = np.column_stack([self.columns[c] for c in names])
        return CompositionBatch(raw, tuple(names))

    def response(self) -> np.ndarray:
        names = self._names("response")
        if len(names) != 1:
            raise ConfigError(f"need exactly one response column, got {names}")
        return np.asarray(self.columns[names[0]], dtype=float)

    def design_matrix(self) -> DesignMatrix:
        names = self._names("covariate") + self._names("logcovariate")
        if not names:
            return DesignMatrix.intercept_only(self.n)
        cols = [np.asarray(self.columns[c], dtype=float) for c in names]
        return DesignMatrix.from_covariates(np.column_stack(cols), names)

    def factor_labels(self) -> list[str] | None:
        names = self._names("factor")
        if not names:
            return None
        if len(names) > 1:
            raise ConfigError(f"at most one factor column is supported, got {names}")
        return [str(v) for v in self.columns[names[0]]]


def load_csv(path: str | Path, role_spec: str) -> Dataset:
    """Read a CSV with strict numeric parsing for numeric-role columns.

    Composition columns are validated (and later closed row-wise when the
    batch is built), log-covariates are logged on load, and any unparsable
    cell fails with its row and column named.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyData(f"{path} is empty") from None
        header = [h.strip() for h in header]
        roles = parse_roles(role_spec, header)
        columns: dict[str, list] = {name: [] for name in header}
        for rownum, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{rownum}: {len(row)} cells for {len(header)} columns"
                )
            for name, cell in zip(header, row):
                role = roles[name]
                cell = cell.strip()
                if role == "ignore":
                    columns[name].append(cell)
                    continue
                if role == "factor":
                    if not cell:
                        raise ParseError(f"{path}:{rownum}: empty factor cell {name!r}")
                    columns[name].append(cell)
                    continue
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}:{rownum}: cell {name!r}={cell!r} is not numeric"
                    ) from None
                if math.isnan(value):
                    raise ParseError(f"{path}:{rownum}: cell {name!r} is NaN")
                if role == "logcovariate":
                    if value <= 0:
                        raise DataError(
                            f"{path}:{rownum}: log covariate {name!r} must be positive"
                        )
                    value = math.log(value)
                columns[name].append(value)
    if not columns or all(len(v) == 0 for v in columns.values()):
        raise EmptyData(f"{path} has a header but no data rows")
    return Dataset(columns=columns, roles=roles, header=tuple(header))


# -- grids ------------------------------------------------------------------------

def parse_alpha_grid(spec: str) -> tuple[float, ...]:
    """Parse ``lo:hi:step`` into a strictly increasing grid (endpoints included)."""
    pieces = spec.split(":")
    if len(pieces) != 3:
        raise ConfigError(f"alpha grid {spec!r} is not lo:hi:step")
    try:
        lo, hi, step = (float(x) for x in pieces)
    except ValueError:
        raise ConfigError(f"alpha grid {spec!r} has non-numeric parts") from None
    if step <= 0 or hi < lo:
        raise ConfigError(f"alpha grid {spec!r} must increase with positive step")
    count = int(round((hi - lo) / step))
    grid = tuple(round(lo + i * step, 10) for i in range(count + 1) if lo + i * step <= hi + 1e-12)
    if not grid:
        raise ConfigError(f"alpha grid {spec!r} is empty")
    return grid


def parse_k_grid(spec: str) -> tuple[int, ...]:
    """Parse ``lo:hi`` into an inclusive integer grid."""
    pieces = spec.split(":")
    if len(pieces) != 2:
        raise ConfigError(f"k grid {spec!r} is not lo:hi")
    try:
        lo, hi = (int(x) for x in pieces)
    except ValueError:
        raise ConfigError(f"k grid {spec!r} has non-integer parts") from None
    if lo < 1 or hi < lo:
        raise ConfigError(f"k grid {spec!r} must satisfy 1 <= lo <= hi")
    return tuple(range(lo, hi + 1))


# -- atomic artifacts ---------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(value) -> str:
    """Full-precision, round-trippable text for CSV cells."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv_atomic(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    _atomic_write(Path(path), "\n".join(lines) + "\n")


def write_json_atomic(path: str | Path, obj) -> None:
    _atomic_write(Path(path), json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- model persistence -----------------------------------------------------------------

def alpha_model_to_dict(model: AlphaRegModel) -> dict:
    return {
        "kind": "alpha_regression",
        "alpha": None if model.alpha is None else model.alpha.value,
        "coefficients": model.coefficients.tolist(),
        "sigma_hat": model.sigma_hat.tolist(),
        "objective_value": model.objective_value,
        "component_labels": list(model.component_labels) if model.component_labels else None,
        "covariate_names": list(model.covariate_names),
        "converged": model.converged,
    }


def alpha_model_from_dict(doc: dict) -> AlphaRegModel:
    return AlphaRegModel(
        alpha=None if doc["alpha"] is None else AlphaParam(doc["alpha"]),
        coefficients=np.asarray(doc["coefficients"], dtype=float),
        sigma_hat=np.asarray(doc["sigma_hat"], dtype=float),
        objective_value=float(doc["objective_value"]),
        component_labels=tuple(doc["component_labels"]) if doc["component_labels"] else None,
        covariate_names=tuple(doc["covariate_names"]),
        converged=bool(doc["converged"]),
    )


def pcr_model_to_dict(model: PcrModel) -> dict:
    return {
        "kind": "pcr",
        "alpha": None if model.alpha is None else model.alpha.value,
        "means": model.standardizer.means.tolist(),
        "sds": model.standardizer.sds.tolist(),
        "eigenvectors": model.eigenvectors.tolist(),
        "eigenvalues": model.eigenvalues.tolist(),
        "k": model.k,
        "coefficients": model.coefficients.tolist(),
        "coef_names": list(model.coef_names),
        "sigma2": model.sigma2,
        "factor": (
            {"levels": list(model.factor.levels), "reference": model.factor.reference}
            if model.factor
            else None
        ),
        "component_labels": list(model.component_labels) if model.component_labels else None,
        "coef_covariance": (
            model.coef_covariance.tolist() if model.coef_covariance is not None else None
        ),
    }


def pcr_model_from_dict(doc: dict) -> PcrModel:
    factor = doc.get("factor")
    return PcrModel(
        alpha=None if doc["alpha"] is None else AlphaParam(doc["alpha"]),
        standardizer=Standardizer(
            np.asarray(doc["means"], dtype=float), np.asarray(doc["sds"], dtype=float)
        ),
        eigenvectors=np.asarray(doc["eigenvectors"], dtype=float),
        eigenvalues=np.asarray(doc["eigenvalues"], dtype=float),
        k=int(doc["k"]),
        coefficients=np.asarray(doc["coefficients"], dtype=float),
        coef_names=tuple(doc["coef_names"]),
        sigma2=float(doc["sigma2"]),
        factor=(
            FactorEncoding(tuple(factor["levels"]), factor["reference"]) if factor else None
        ),
        component_labels=tuple(doc["component_labels"]) if doc["component_labels"] else None,
        coef_covariance=(
            np.asarray(doc["coef_covariance"], dtype=float)
            if doc.get("coef_covariance") is not None
            else None
        ),
    )


def save_model(path: str | Path, model) -> None:
    if isinstance(model, AlphaRegModel):
        write_json_atomic(path, alpha_model_to_dict(model))
    elif isinstance(model, PcrModel):
        write_json_atomic(path, pcr_model_to_dict(model))
    else:
        raise ConfigError(f"cannot serialize {type(model).__name__}")


def load_model(path: str | Path):
    with Path(path).open(encoding="utf-8") as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    if kind == "alpha_regression":
        return alpha_model_from_dict(doc)
    if kind == "pcr":
        return pcr_model_from_dict(doc)
    raise DataError(f"unknown model kind {kind!r} in {path}")
