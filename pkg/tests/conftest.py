from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).resolve().parents[1] / "data"
GLASS_CSV = DATA_DIR / "glass.csv"
FORAM_CSV = DATA_DIR / "foraminiferal.csv"


@pytest.fixture(scope="session")
def glass_path():
    if not GLASS_CSV.exists():
        pytest.skip(
            "data/glass.csv is absent; run scripts/fetch_glass.py (needs network "
            "or a local glass.data) to enable the glass golden tests"
        )
    return GLASS_CSV


@pytest.fixture(scope="session")
def foram_path():
    if not FORAM_CSV.exists():
        pytest.skip(
            "data/foraminiferal.csv is absent; transcribe the 30-row table "
            "(see data/README.md) to enable the foraminiferal golden tests"
        )
    return FORAM_CSV


@pytest.fixture()
def positive_csv(tmp_path):
    """Small zero-free batch with a covariate, written as a CSV file."""
    rng = np.random.default_rng(101)
    n = 24
    x = rng.uniform(1.0, 30.0, size=n)
    parts = rng.uniform(0.05, 1.0, size=(n, 3))
    parts = parts / parts.sum(axis=1)[:, None]
    lines = ["depth,a,b,c"]
    for i in range(n):
        cells = [repr(float(v)) for v in (x[i], parts[i, 0], parts[i, 1], parts[i, 2])]
        lines.append(",".join(cells))
    path = tmp_path / "positive.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture()
def zeros_csv(tmp_path):
    """Batch with a few structural zeros plus a covariate."""
    rng = np.random.default_rng(55)
    n = 20
    x = np.arange(1.0, n + 1)
    parts = rng.uniform(0.05, 1.0, size=(n, 4))
    for r in (3, 7, 12):
        parts[r, rng.integers(2, 4)] = 0.0
    parts = parts / parts.sum(axis=1)[:, None]
    lines = ["depth,w,x,y,z"]
    for i in range(n):
        cells = [repr(float(v)) for v in (x[i], *parts[i])]
        lines.append(",".join(cells))
    path = tmp_path / "zeros.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture()
def pcr_csv(tmp_path):
    """Scalar response driven by a compositional block plus a factor."""
    rng = np.random.default_rng(7)
    n = 60
    parts = rng.uniform(0.05, 1.0, size=(n, 4))
    parts = parts / parts.sum(axis=1)[:, None]
    level = rng.choice(["g1", "g2", "g3"], size=n)
    shift = {"g1": 0.0, "g2": 1.5, "g3": -1.0}
    coords = np.log(parts) - np.log(parts).mean(axis=1)[:, None]
    y = 2.0 + coords[:, 0] - 0.5 * coords[:, 2] + rng.normal(0, 0.2, n)
    y = y + np.array([shift[l] for l in level])
    lines = ["y,p1,p2,p3,p4,grp"]
    for i in range(n):
        cells = [repr(float(v)) for v in (y[i], *parts[i])] + [str(level[i])]
        lines.append(",".join(cells))
    path = tmp_path / "pcr.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
