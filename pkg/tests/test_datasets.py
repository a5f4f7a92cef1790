import numpy as np
import pytest

from compreg.datasets import (
    GLASS_REFERENCE_LEVEL,
    load_foraminiferal,
    load_glass,
    normalize_uci_glass,
)
from compreg.exceptions import DataError, ParseError
from compreg.impute import em_impute
from compreg.pcr import cross_validate, pcr_fit, standardized_residuals
from compreg.regression import fit_alpha_regression, predict, select_alpha_by_kl
from compreg.simplex import kl_fit_divergence

UCI_SAMPLE = """1,1.52101,13.64,4.49,1.10,71.78,0.06,8.75,0.00,0.00,1
2,1.51761,13.89,3.60,1.36,72.73,0.48,7.83,0.00,0.00,2
3,1.51618,13.53,3.55,1.54,72.99,0.39,7.78,0.00,0.00,7
"""


def test_normalize_uci_glass_shape_and_scaling():
    csv_text = normalize_uci_glass(UCI_SAMPLE)
    lines = csv_text.strip().splitlines()
    assert lines[0] == "RI,Na,Mg,Al,Si,K,Ca,Ba,Fe,Type"
    first = lines[1].split(",")
    assert float(first[0]) == pytest.approx(1000 * (1.52101 - 1.518), abs=1e-9)
    assert first[-1] == "WinF" and lines[2].split(",")[-1] == "WinNF"
    assert lines[3].split(",")[-1] == "Head"
    assert len(first) == 10  # Id dropped


def test_normalize_uci_glass_rejects_bad_rows():
    with pytest.raises(ParseError):
        normalize_uci_glass("1,1.52,13.64\n")
    with pytest.raises(ParseError):
        normalize_uci_glass(UCI_SAMPLE.replace(",1\n", ",9\n", 1))


def test_load_glass_round_trip(tmp_path):
    path = tmp_path / "glass.csv"
    path.write_text(normalize_uci_glass(UCI_SAMPLE), encoding="utf-8")
    y, batch, factor = load_glass(path)
    assert y.shape == (3,)
    assert batch.D == 8 and batch.labels == ("Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe")
    assert factor == ["WinF", "WinNF", "Head"]
    # rows are closed over the 8 listed elements
    np.testing.assert_allclose(batch.parts.sum(axis=1), 1.0, atol=1e-12)


def synth_foram_csv(tmp_path, n=30):
    rng = np.random.default_rng(9)
    lines = ["depth,spA,spB,spC,spD"]
    for i in range(n):
        parts = rng.uniform(0.05, 1.0, size=4)
        if i in (2, 7, 11, 19, 23):
            parts[rng.integers(2, 4)] = 0.0
        parts = parts / parts.sum()
        lines.append(",".join([str(i + 1)] + [repr(float(v)) for v in parts]))
    path = tmp_path / "foraminiferal.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_load_foraminiferal_shape(tmp_path):
    path = synth_foram_csv(tmp_path)
    Y, X = load_foraminiferal(path)
    assert Y.n == 30 and Y.D == 4
    assert Y.labels == ("spA", "spB", "spC", "spD")
    assert X.covariate_names == ("depth",)
    assert X.values[1, 1] == pytest.approx(np.log(2.0))


def test_load_foraminiferal_checksum_guard(tmp_path, monkeypatch):
    path = synth_foram_csv(tmp_path)
    monkeypatch.setattr("compreg.datasets.FORAM_SHA256", "0" * 64)
    with pytest.raises(DataError):
        load_foraminiferal(path)
    load_foraminiferal(path, verify_checksum=False)


def test_load_foraminiferal_needs_depth(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("a,b\n0.5,0.5\n", encoding="utf-8")
    with pytest.raises(DataError):
        load_foraminiferal(path)


def test_foram_shaped_pipeline_runs(tmp_path):
    # same workflow as the published analysis, on synthetic stand-in data:
    # fit at alpha=1 on the zero-carrying batch, impute, refit, compare KLs
    Y, X = load_foraminiferal(synth_foram_csv(tmp_path))
    m1 = fit_alpha_regression(Y, X, 1.0)
    kl1 = kl_fit_divergence(Y, predict(m1, X))
    imputed = em_impute(Y).batch
    sel = select_alpha_by_kl(Y, X, [0.25, 0.5, 0.75, 1.0], fit_batch=imputed)
    assert np.isfinite(kl1) and kl1 >= 0
    assert not sel.failures


# -- golden tests gated on the real tables --------------------------------------------------

def test_foram_selection_curve_minimum_at_one(foram_path):
    Y, X = load_foraminiferal(foram_path)
    grid = [round(0.01 * i, 10) for i in range(1, 101)]
    sel = select_alpha_by_kl(Y, X, grid)
    values = np.asarray(sel.criterion_values)
    at_one = values[sel.grid.index(1.0)]
    assert at_one == pytest.approx(6.123, abs=0.01)
    assert at_one <= np.nanmin(values) + 1e-9


def test_foram_detection_limits_match_column_scan(foram_path):
    from compreg.impute import detect_limits

    Y, _ = load_foraminiferal(foram_path)
    limits = detect_limits(Y)
    for j in range(Y.D):
        column = Y.parts[:, j]
        assert limits[j] == column[column > 0].min()


def test_glass_cv_chooses_alpha_near_one_k7(glass_path):
    y, Xc, factor = load_glass(glass_path)
    report = cross_validate(
        y,
        Xc,
        [0.25, 0.5, 0.75, 0.9, 0.95, 1.0],
        [1, 2, 3, 4, 5, 6, 7],
        folds=10,
        seed=0,
        stratify_by=factor,
    )
    assert 0.9 <= report.chosen_alpha <= 1.0
    assert report.chosen_k == 7


def test_glass_best_model_flags_some_outliers(glass_path):
    y, Xc, factor = load_glass(glass_path)
    model = pcr_fit(y, Xc, 1.0, k=7, factor=factor, reference=GLASS_REFERENCE_LEVEL)
    _, flags = standardized_residuals(model, y, Xc, factor)
    assert flags.any()
