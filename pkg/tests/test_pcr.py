import numpy as np
import pytest

from compreg.exceptions import (
    ConfigError,
    DegenerateVariance,
    DimensionMismatch,
    FoldTooSmall,
    LabelMismatch,
    SingularScores,
    TooFewRows,
    UnknownFactorLevel,
)
from compreg.pcr import (
    CvReport,
    FactorEncoding,
    Standardizer,
    adjusted_r2,
    assign_folds,
    cross_validate,
    pcr_fit,
    pcr_predict,
    standardized_residuals,
)
from compreg.simplex import alpha_transform_batch, close_batch, ilr_batch


def random_batch(rng, n, D, labels=None):
    return close_batch(rng.uniform(0.05, 1.0, size=(n, D)), labels)


def random_problem(rng, n=40, D=4, alpha=1.0, noise=0.2):
    X = random_batch(rng, n, D)
    coords = alpha_transform_batch(X, alpha).coords
    beta = rng.normal(size=coords.shape[1])
    y = 1.5 + coords @ beta + rng.normal(scale=noise, size=n)
    return y, X


# -- standardizer / encoding -----------------------------------------------------

def test_standardizer_zero_mean_unit_sd():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 4)) * [1, 5, 0.2, 3] + [2, -1, 0, 4]
    s = Standardizer.fit(X)
    Z = s.apply(X)
    np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-10)
    np.testing.assert_allclose(Z.std(axis=0, ddof=1), 1.0, atol=1e-10)


def test_standardizer_rejects_constant_column():
    X = np.column_stack([np.ones(10), np.arange(10.0)])
    with pytest.raises(SingularScores):
        Standardizer.fit(X)


def test_factor_encoding_reference_default_last_alphabetical():
    enc = FactorEncoding.from_labels(["b", "a", "c", "a"])
    assert enc.levels == ("a", "b", "c")
    assert enc.reference == "c"
    assert enc.dummy_levels == ("a", "b")


def test_factor_encoding_explicit_reference_and_unknown():
    enc = FactorEncoding.from_labels(["x", "y", "z"], reference="x")
    M = enc.encode(["x", "z", "y"])
    np.testing.assert_allclose(M, [[0, 0], [0, 1], [1, 0]])
    with pytest.raises(UnknownFactorLevel):
        enc.encode(["w"])
    with pytest.raises(UnknownFactorLevel):
        FactorEncoding.from_labels(["x", "y"], reference="q")


# -- fitting ---------------------------------------------------------------------

def test_full_k_equals_ols_fitted_values():
    rng = np.random.default_rng(1)
    y, X = random_problem(rng, n=50, D=5)
    model = pcr_fit(y, X, 1.0, k=4)
    fitted = pcr_predict(model, X)

    coords = alpha_transform_batch(X, 1.0).coords
    Xs = (coords - coords.mean(axis=0)) / coords.std(axis=0, ddof=1)
    W = np.column_stack([np.ones(len(y)), Xs])
    ols_fit = W @ np.linalg.lstsq(W, y, rcond=None)[0]
    np.testing.assert_allclose(fitted, ols_fit, atol=1e-8)


def test_scores_route_equals_coefficient_route():
    rng = np.random.default_rng(2)
    y, X = random_problem(rng, n=45, D=5)
    for k in (1, 2, 4):
        model = pcr_fit(y, X, 0.5, k=k)
        fitted = pcr_predict(model, X)

        coords = alpha_transform_batch(X, 0.5).coords
        Xs = model.standardizer.apply(coords)
        Z = Xs @ model.eigenvectors[:, :k]
        B = model.eigenvectors[:, :k] @ np.linalg.solve(Z.T @ Z, Z.T @ y)
        fitted_via_B = y.mean() + Xs @ B  # scores are centered, so intercept = mean
        np.testing.assert_allclose(fitted, fitted_via_B, atol=1e-8)


def test_pcr_predict_matches_direct_least_squares_oracle():
    # n=6, D=3 desk-scale data; with k = d the pipeline is plain least squares
    y = np.array([2.0, 3.5, 1.0, 4.2, 2.8, 3.9])
    X = close_batch(
        [
            [0.2, 0.3, 0.5],
            [0.1, 0.4, 0.5],
            [0.4, 0.4, 0.2],
            [0.3, 0.2, 0.5],
            [0.25, 0.35, 0.4],
            [0.15, 0.55, 0.3],
        ]
    )
    model = pcr_fit(y, X, 1.0, k=2)
    coords = alpha_transform_batch(X, 1.0).coords
    W = np.column_stack([np.ones(6), coords])
    oracle = W @ np.linalg.lstsq(W, y, rcond=None)[0]
    np.testing.assert_allclose(pcr_predict(model, X), oracle, atol=1e-8)


def test_eigenvectors_orthogonal_scores_centered():
    rng = np.random.default_rng(3)
    y, X = random_problem(rng, n=30, D=6)
    model = pcr_fit(y, X, 0.8, k=3)
    V = model.eigenvectors
    np.testing.assert_allclose(V.T @ V, np.eye(V.shape[1]), atol=1e-10)
    assert np.all(np.diff(model.eigenvalues) <= 1e-10)
    coords = alpha_transform_batch(X, 0.8).coords
    scores = model.standardizer.apply(coords) @ V
    np.testing.assert_allclose(scores.mean(axis=0), 0.0, atol=1e-10)


def test_fitted_values_invariant_to_eigenvector_sign_flips():
    rng = np.random.default_rng(4)
    y, X = random_problem(rng, n=35, D=4)
    model = pcr_fit(y, X, 1.0, k=2)
    fitted = pcr_predict(model, X)

    coords = alpha_transform_batch(X, 1.0).coords
    Xs = model.standardizer.apply(coords)
    V = model.eigenvectors.copy()
    V[:, 0] = -V[:, 0]  # flip and redo the score regression by hand
    Z = Xs @ V[:, :2]
    W = np.column_stack([np.ones(len(y)), Z])
    refit = W @ np.linalg.lstsq(W, y, rcond=None)[0]
    np.testing.assert_allclose(refit, fitted, atol=1e-8)


def test_pcr_with_factor_changes_fit_and_keeps_names():
    rng = np.random.default_rng(5)
    y, X = random_problem(rng, n=40, D=4)
    factor = list(rng.choice(["red", "green", "blue"], size=40))
    y = y + np.array([{"red": 0.0, "green": 1.0, "blue": -1.0}[f] for f in factor])
    model = pcr_fit(y, X, 1.0, k=3, factor=factor, reference="red")
    assert model.coef_names == ("intercept", "PC1", "PC2", "PC3", "blue", "green")
    assert model.n_predictors == 5
    fitted = pcr_predict(model, X, factor)
    assert adjusted_r2(y, fitted, model.n_predictors) > adjusted_r2(
        y, pcr_predict(pcr_fit(y, X, 1.0, k=3), X), 3
    )


def test_pcr_fit_validation_errors():
    rng = np.random.default_rng(6)
    y, X = random_problem(rng, n=10, D=4)
    with pytest.raises(ConfigError):
        pcr_fit(y, X, 1.0, k=5)
    with pytest.raises(ConfigError):
        pcr_fit(y, X, 1.0, k=0)
    with pytest.raises(TooFewRows):
        pcr_fit(y[:4], close_batch(X.parts[:4]), 1.0, k=3)
    with pytest.raises(DimensionMismatch):
        pcr_fit(y[:-1], X, 1.0, k=2)


def test_pcr_prediction_invariant_to_row_rescaling():
    rng = np.random.default_rng(7)
    y, X = random_problem(rng, n=25, D=4)
    model = pcr_fit(y, X, 0.7, k=2)
    raw = X.parts * rng.uniform(0.5, 200.0, size=(25, 1))
    np.testing.assert_allclose(
        pcr_predict(model, close_batch(raw)), pcr_predict(model, X), atol=1e-10
    )


def test_pcr_duplicated_row_identical_prediction():
    rng = np.random.default_rng(8)
    y, X = random_problem(rng, n=20, D=3)
    model = pcr_fit(y, X, 1.0, k=2)
    doubled = close_batch(np.vstack([X.parts[3], X.parts[3]]))
    pred = pcr_predict(model, doubled)
    assert pred[0] == pred[1]


def test_pcr_label_mismatch():
    rng = np.random.default_rng(9)
    X = random_batch(rng, 20, 3, labels=["a", "b", "c"])
    y = rng.normal(size=20)
    model = pcr_fit(y, X, 1.0, k=2)
    other = random_batch(rng, 4, 3, labels=["a", "c", "b"])
    with pytest.raises(LabelMismatch):
        pcr_predict(model, other)


def test_pcr_ilr_route_at_alpha_zero():
    rng = np.random.default_rng(10)
    y, X = random_problem(rng, n=30, D=4)
    model = pcr_fit(y, X, 0.0, k=3)
    assert model.alpha is None
    coords = ilr_batch(X).coords
    Xs = (coords - coords.mean(axis=0)) / coords.std(axis=0, ddof=1)
    W = np.column_stack([np.ones(30), Xs])
    oracle = W @ np.linalg.lstsq(W, y, rcond=None)[0]
    np.testing.assert_allclose(pcr_predict(model, X), oracle, atol=1e-8)


# -- adjusted R^2 -------------------------------------------------------------------

def test_adjusted_r2_perfect_fit_is_one():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert adjusted_r2(y, y, 1) == pytest.approx(1.0)


def test_adjusted_r2_mean_fit_nonpositive():
    y = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    fitted = np.full(5, y.mean())
    assert adjusted_r2(y, fitted, 2) <= 0.0


def test_adjusted_r2_errors():
    with pytest.raises(DegenerateVariance):
        adjusted_r2([1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 1)
    with pytest.raises(TooFewRows):
        adjusted_r2([1.0, 2.0], [1.0, 2.0], 1)


# -- standardized residuals ------------------------------------------------------------

def test_standardized_residuals_perfect_fit_all_zero():
    rng = np.random.default_rng(11)
    X = random_batch(rng, 12, 3)
    coords = alpha_transform_batch(X, 1.0).coords
    y = 0.5 + coords @ np.array([2.0, -1.0])  # exactly linear, k = d interpolates
    model = pcr_fit(y, X, 1.0, k=2)
    r, flags = standardized_residuals(model, y, X)
    np.testing.assert_allclose(r, 0.0, atol=1e-6)
    assert not flags.any()


def test_standardized_residuals_equal_leverage_symmetric_design():
    # duplicated rows produce pairwise-equal leverages
    rng = np.random.default_rng(12)
    base = random_batch(rng, 6, 3).parts
    X = close_batch(np.vstack([base, base]))
    y = rng.normal(size=12)
    model = pcr_fit(y, X, 1.0, k=2)
    W_coords = alpha_transform_batch(X, 1.0).coords
    Xs = model.standardizer.apply(W_coords)
    scores = Xs @ model.eigenvectors[:, :2]
    W = np.column_stack([np.ones(12), scores])
    h = np.einsum("ij,ji->i", W, np.linalg.solve(W.T @ W, W.T))
    np.testing.assert_allclose(h[:6], h[6:], atol=1e-10)


def test_standardized_residuals_flag_outliers():
    rng = np.random.default_rng(13)
    y, X = random_problem(rng, n=40, D=4, noise=0.1)
    y[5] += 8.0  # inject a gross outlier
    model = pcr_fit(y, X, 1.0, k=3)
    r, flags = standardized_residuals(model, y, X)
    assert flags[5]


# -- cross-validation -------------------------------------------------------------------

def test_assign_folds_deterministic_and_balanced():
    a1 = assign_folds(20, 4, seed=42)
    a2 = assign_folds(20, 4, seed=42)
    np.testing.assert_array_equal(a1, a2)
    counts = np.bincount(a1, minlength=4)
    assert counts.min() == counts.max() == 5
    assert not np.array_equal(a1, assign_folds(20, 4, seed=43))


def test_assign_folds_stratified_keeps_levels_in_training():
    rng = np.random.default_rng(14)
    factor = ["a"] * 12 + ["b"] * 5 + ["c"] * 3
    a = assign_folds(20, 5, seed=1, factor=factor)
    for fold in range(5):
        train_levels = {f for f, g in zip(factor, a) if g != fold}
        assert train_levels == {"a", "b", "c"}


def test_assign_folds_errors():
    with pytest.raises(ConfigError):
        assign_folds(10, 1, seed=0)
    with pytest.raises(FoldTooSmall):
        assign_folds(3, 5, seed=0)
    with pytest.raises(FoldTooSmall):
        assign_folds(4, 2, seed=0, factor=["a", "a", "a", "b"])


def test_cross_validate_exact_cell_interpolates():
    rng = np.random.default_rng(15)
    X = random_batch(rng, 40, 4)
    coords = alpha_transform_batch(X, 0.6).coords
    y = 2.0 - 1.0 * coords[:, 0] + 0.5 * coords[:, 2]
    report = cross_validate(y, X, [0.3, 0.6], [1, 2, 3], folds=5, seed=3)
    exact = [c for c in report.cells if c.alpha == 0.6 and c.k == 3]
    assert exact[0].mean_mspe < 1e-10
    assert report.chosen_cell.mean_mspe < 1e-10


def test_cross_validate_deterministic_given_seed():
    rng = np.random.default_rng(16)
    y, X = random_problem(rng, n=30, D=4)
    r1 = cross_validate(y, X, [0.5, 1.0], [1, 2], folds=5, seed=11)
    r2 = cross_validate(y, X, [0.5, 1.0], [1, 2], folds=5, seed=11)
    assert r1 == r2


def test_cross_validate_with_factor_stratifies():
    rng = np.random.default_rng(17)
    y, X = random_problem(rng, n=36, D=4)
    factor = list(rng.choice(["u", "v", "w"], size=36))
    y = y + np.array([{"u": 0.0, "v": 2.0, "w": -2.0}[f] for f in factor])
    report = cross_validate(
        y, X, [1.0], [2], factor=factor, folds=4, seed=5, reference="u"
    )
    assert np.isfinite(report.chosen_cell.mean_mspe)


def test_cross_validate_tie_breaks_toward_small_k():
    report = CvReport(
        cells=(
            __import__("compreg.pcr", fromlist=["CvCell"]).CvCell(1.0, 3, (0.5,), 0.5),
        ),
        chosen_alpha=1.0,
        chosen_k=3,
        folds=2,
        seed=0,
    )
    assert report.chosen_cell.k == 3
    rng = np.random.default_rng(18)
    y, X = random_problem(rng, n=30, D=4)
    rep = cross_validate(y, X, [0.5], [1, 2], folds=5, seed=2)
    best = min(rep.cells, key=lambda c: (c.mean_mspe, c.k, abs(c.alpha)))
    assert (rep.chosen_alpha, rep.chosen_k) == (best.alpha, best.k)


def test_cross_validate_empty_grid_error():
    rng = np.random.default_rng(19)
    y, X = random_problem(rng, n=20, D=3)
    with pytest.raises(ConfigError):
        cross_validate(y, X, [], [1], folds=3, seed=0)
