"""Command-line interface.

One subcommand per pipeline stage; every run reads a CSV plus a role spec,
writes its artifacts atomically under --out, and prints a single summary
line. Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .exceptions import (
    CompregError,
    ConfigError,
    DataError,
    LabelMismatch,
    NumericError,
)
from .impute import ImputeConfig, em_impute
from .pcr import (
    adjusted_r2,
    cross_validate,
    pcr_fit,
    pcr_predict,
    standardized_residuals,
)
from .regression import (
    AlphaRegModel,
    default_alpha_grid,
    fit_alpha_regression,
    fit_alr_regression,
    predict,
    select_alpha_by_kl,
    select_alpha_by_profile,
)
from .pcr import PcrModel
from .simplex import ilr_batch, alpha_transform_batch, kl_fit_divergence


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, help="input CSV path")
    parser.add_argument("--roles", required=True, help="role spec, e.g. 'response=RI;composition=Na:Fe'")
    parser.add_argument("--out", required=True, help="output directory for artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compreg",
        description="Compositional-data regression toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="power-family or ilr coordinates of the composition block")
    _add_common(p)
    p.add_argument("--alpha", type=float, required=True, help="power parameter; 0 selects ilr")

    p = sub.add_parser("impute", help="EM zero replacement for the composition block")
    _add_common(p)
    p.add_argument("--threshold-fraction", type=float, default=0.65)
    p.add_argument("--em-tolerance", type=float, default=0.01)
    p.add_argument("--max-iterations", type=int, default=100)

    p = sub.add_parser("alrreg", help="additive log-ratio regression (closed form)")
    _add_common(p)
    p.add_argument("--divisor", help="component label used as the alr divisor (default: last)")
    p.add_argument("--impute", action="store_true", help="EM-impute zeros before fitting")

    p = sub.add_parser("alphareg", help="power-parameter regression at a fixed alpha")
    _add_common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--impute", action="store_true")

    p = sub.add_parser("select-alpha", help="grid search for the power parameter")
    _add_common(p)
    p.add_argument(
        "--alpha-grid",
        help="lo:hi:step (default: -1:1:0.01, restricted to 0.01:1:0.01 when zeros are present)",
    )
    p.add_argument(
        "--criterion",
        choices=("kl", "profile"),
        default="kl",
        help="twice-KL divergence (default) or profile objective",
    )
    p.add_argument("--impute", action="store_true", help="fit on imputed data, score against the original")

    p = sub.add_parser("pcr", help="principal component regression at fixed alpha and k")
    _add_common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--reference", help="reference factor level (default: last alphabetically)")
    p.add_argument("--impute", action="store_true")

    p = sub.add_parser("pcr-cv", help="cross-validated (alpha, k) grid for PCR")
    _add_common(p)
    p.add_argument("--alpha-grid", required=True, help="lo:hi:step")
    p.add_argument("--k-grid", required=True, help="lo:hi")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--reference")
    p.add_argument("--impute", action="store_true")

    p = sub.add_parser("predict", help="apply a saved model JSON to new rows")
    _add_common(p)
    p.add_argument("--model", required=True, help="model JSON path")

    return parser


def _maybe_impute(batch, flag: bool):
    return em_impute(batch).batch if flag and batch.has_zeros() else batch


def _write_composition_fits(out: Path, observed, fitted) -> None:
    labels = observed.labels or tuple(f"c{i + 1}" for i in range(observed.D))
    rows = []
    for i in range(observed.n):
        for j, name in enumerate(labels):
            rows.append((i, name, observed.parts[i, j], fitted.parts[i, j]))
    io.write_csv_atomic(out / "fitted.csv", ["row", "component", "observed", "fitted"], rows)


def _cmd_transform(args) -> str:
    ds = io.load_csv(args.input, args.roles)
    batch = ds.composition_batch()
    tb = ilr_batch(batch) if args.alpha == 0.0 else alpha_transform_batch(batch, args.alpha)
    header = [f"z{i + 1}" for i in range(tb.d)]
    io.write_csv_atomic(Path(args.out) / "transformed.csv", header, tb.coords)
    return f"transform alpha={args.alpha} rows={tb.n} dims={tb.d}"


def _cmd_impute(args) -> str:
    ds = io.load_csv(args.input, args.roles)
    batch = ds.composition_batch()
    cfg = ImputeConfig(
        threshold_fraction=args.threshold_fraction,
        em_tolerance=args.em_tolerance,
        max_iterations=args.max_iterations,
    )
    result = em_impute(batch, cfg)
    out = Path(args.out)
    labels = batch.labels or tuple(f"c{i + 1}" for i in range(batch.D))
    io.write_csv_atomic(out / "imputed.csv", labels, result.batch.parts)
    io.write_csv_atomic(
        out / "impute_changes.csv",
        ["row", "component", "old", "new"],
        [(c.row, labels[c.component], c.old, c.new) for c in result.changed_cells],
    )
    return (
        f"impute iterations={result.iterations} converged={result.converged} "
        f"changed_cells={len(result.changed_cells)}"
    )


def _cmd_alrreg(args) -> str:
    ds = io.load_csv(args.input, args.roles)
    Y = ds.composition_batch()
    X = ds.design_matrix()
    fit_on = _maybe_impute(Y, args.impute)
    divisor = -1
    if args.divisor is not None:
        if Y.labels is None or args.divisor not in Y.labels:
            raise ConfigError(f"divisor {args.divisor!r} is not a component label")
        divisor = Y.labels.index(args.divisor)
    model = fit_alr_regression(fit_on, X, divisor)
    fits = predict(model, X)
    kl = kl_fit_divergence(Y, fits)
    out = Path(args.out)
    io.save_model(out / "model.json", model)
    _write_composition_fits(out, Y, fits)
    return f"alrreg twice_kl={io.fmt(kl)}"


def _cmd_alphareg(args) -> str:
    ds = io.load_csv(args.input, args.roles)
    Y = ds.composition_batch()
    X = ds.design_matrix()
    fit_on = _maybe_impute(Y, args.impute)
    model = fit_alpha_regression(fit_on, X, args.alpha)
    fits = predict(model, X)
    kl = kl_fit_divergence(Y, fits)
    out = Path(args.out)
    io.save_model(out / "model.json", model)
    _write_composition_fits(out, Y, fits)
    return (
        f"alphareg alpha={args.alpha} twice_kl={io.fmt(kl)} "
        f"objective={io.fmt(model.objective_value)} converged={model.converged}"
    )


def _cmd_select_alpha(args) -> str:
    grid = io.parse_alpha_grid(args.alpha_grid) if args.alpha_grid else None
    ds = io.load_csv(args.input, args.roles)
    Y = ds.composition_batch()
    X = ds.design_matrix()
    if grid is None:
        grid = default_alpha_grid(Y.has_zeros())
    if args.criterion == "kl":
        fit_batch = _maybe_impute(Y, args.impute) if args.impute else None
        selection = select_alpha_by_kl(Y, X, grid, fit_batch=fit_batch)
        fit_on = fit_batch if fit_batch is not None else Y
    else:
        fit_on = _maybe_impute(Y, args.impute)
        selection = select_alpha_by_profile(fit_on, X, grid)
    out = Path(args.out)
    io.write_csv_atomic(
        out / "alpha_curve.csv",
        ["alpha", "criterion"],
        zip(selection.grid, selection.criterion_values),
    )
    model = fit_alpha_regression(fit_on, X, selection.chosen_alpha)
    fits = predict(model, X)
    doc = io.alpha_model_to_dict(model)
    doc["selection"] = {
        "criterion_kind": selection.criterion_kind,
        "grid": list(selection.grid),
        "criterion_values": list(selection.criterion_values),
        "chosen_alpha": selection.chosen_alpha.value,
    }
    io.write_json_atomic(out / "model.json", doc)
    _write_composition_fits(out, Y, fits)
    chosen_value = selection.criterion_values[
        selection.grid.index(selection.chosen_alpha.value)
    ]
    return (
        f"select-alpha criterion={selection.criterion_kind} "
        f"chosen_alpha={io.fmt(selection.chosen_alpha.value)} value={io.fmt(chosen_value)}"
    )


def _cmd_pcr(args) -> str:
    ds = io.load_csv(args.input, args.roles)
    y = ds.response()
    Xc = _maybe_impute(ds.composition_batch(), args.impute)
    factor = ds.factor_labels()
    model = pcr_fit(y, Xc, args.alpha, args.k, factor, args.reference)
    fitted = pcr_predict(model, Xc, factor)
    r2 = adjusted_r2(y, fitted, model.n_predictors)
    residuals, flags = standardized_residuals(model, y, Xc, factor)
    out = Path(args.out)
    io.save_model(out / "model.json", model)
    io.write_csv_atomic(
        out / "fitted.csv",
        ["row", "observed", "fitted"],
        zip(range(len(y)), y, fitted),
    )
    io.write_csv_atomic(
        out / "residuals.csv",
        ["row", "fitted", "standardized_residual", "outlier"],
        zip(range(len(y)), fitted, residuals, flags),
    )
    return f"pcr alpha={args.alpha} k={args.k} adjusted_r2={io.fmt(r2)}"


def _cmd_pcr_cv(args) -> str:
    alpha_grid = io.parse_alpha_grid(args.alpha_grid)
    k_grid = io.parse_k_grid(args.k_grid)
    ds = io.load_csv(args.input, args.roles)
    y = ds.response()
    Xc = _maybe_impute(ds.composition_batch(), args.impute)
    factor = ds.factor_labels()
    report = cross_validate(
        y,
        Xc,
        alpha_grid,
        k_grid,
        factor=factor,
        folds=args.folds,
        seed=args.seed,
        reference=args.reference,
    )
    out = Path(args.out)
    rows = []
    for cell in report.cells:
        for fold, mspe in enumerate(cell.fold_mspes):
            rows.append((cell.alpha, cell.k, fold, mspe, cell.mean_mspe))
    io.write_csv_atomic(
        out / "cv_report.csv", ["alpha", "k", "fold", "mspe", "mean_mspe"], rows
    )
    model = pcr_fit(y, Xc, report.chosen_alpha, report.chosen_k, factor, args.reference)
    io.save_model(out / "model.json", model)
    return (
        f"pcr-cv chosen_alpha={io.fmt(report.chosen_alpha)} chosen_k={report.chosen_k} "
        f"mspe={io.fmt(report.chosen_cell.mean_mspe)} folds={report.folds} seed={report.seed}"
    )


def _cmd_predict(args) -> str:
    model = io.load_model(args.model)
    ds = io.load_csv(args.input, args.roles)
    out = Path(args.out)
    if isinstance(model, AlphaRegModel):
        X = ds.design_matrix()
        if model.covariate_names and X.covariate_names != model.covariate_names:
            raise LabelMismatch(
                f"model covariates {model.covariate_names} vs data {X.covariate_names}"
            )
        fits = predict(model, X)
        labels = fits.labels or tuple(f"c{i + 1}" for i in range(fits.D))
        io.write_csv_atomic(out / "predictions.csv", labels, fits.parts)
        return f"predict kind=alpha_regression rows={fits.n}"
    if isinstance(model, PcrModel):
        Xc = ds.composition_batch()
        factor = ds.factor_labels()
        yhat = pcr_predict(model, Xc, factor)
        io.write_csv_atomic(
            out / "predictions.csv", ["row", "prediction"], zip(range(len(yhat)), yhat)
        )
        return f"predict kind=pcr rows={len(yhat)}"
    raise DataError(f"unsupported model type {type(model).__name__}")


_HANDLERS = {
    "transform": _cmd_transform,
    "impute": _cmd_impute,
    "alrreg": _cmd_alrreg,
    "alphareg": _cmd_alphareg,
    "select-alpha": _cmd_select_alpha,
    "pcr": _cmd_pcr,
    "pcr-cv": _cmd_pcr_cv,
    "predict": _cmd_predict,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = _HANDLERS[args.command](args)
    except ConfigError as exc:
        print(f"compreg: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"compreg: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"compreg: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
