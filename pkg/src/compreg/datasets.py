"""Loaders for the two benchmark datasets.

Neither dataset is redistributed here. The forensic glass table is fetched
from the UCI repository by ``scripts/fetch_glass.py``; the foraminiferal
compositions must be transcribed by hand (see ``data/README.md``) into a
small CSV whose checksum can be pinned below once a verified copy exists.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .exceptions import DataError, ParseError
from .io import load_csv
from .regression import DesignMatrix
from .simplex import CompositionBatch

GLASS_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/glass/glass.data"

GLASS_ELEMENTS = ("Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe")

# UCI integer codes; code 4 (vehicle non-float) has no rows in the file
GLASS_TYPES = {
    "1": "WinF",
    "2": "WinNF",
    "3": "Veh",
    "5": "Con",
    "6": "Tabl",
    "7": "Head",
}
GLASS_REFERENCE_LEVEL = "Head"

# refractive indices are reported as 1000 * (RI - 1.518): the raw values sit
# in [1.51, 1.54], far too compressed for a meaningful squared-error scale
GLASS_RI_OFFSET = 1.518
GLASS_RI_SCALE = 1000.0

GLASS_ROLES = "response=RI;composition=Na:Fe;factor=Type"

# pin after transcribing a verified copy; None skips the integrity check
FORAM_SHA256: str | None = None


def normalize_uci_glass(raw_text: str) -> str:
    """Convert the headerless UCI ``glass.data`` file to the working CSV.

    Drops the Id column, rescales RI to 1000 * (RI - offset), and replaces
    type codes with short level names.
    """
    out_lines = ["RI," + ",".join(GLASS_ELEMENTS) + ",Type"]
    for lineno, line in enumerate(raw_text.strip().splitlines(), start=1):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 11:
            raise ParseError(f"glass.data:{lineno}: expected 11 fields, got {len(cells)}")
        ri = GLASS_RI_SCALE * (float(cells[1]) - GLASS_RI_OFFSET)
        code = cells[10]
        if code not in GLASS_TYPES:
            raise ParseError(f"glass.data:{lineno}: unknown glass type code {code!r}")
        out_lines.append(
            ",".join([repr(ri)] + cells[2:10] + [GLASS_TYPES[code]])
        )
    return "\n".join(out_lines) + "\n"


def load_glass(path: str | Path) -> tuple[np.ndarray, CompositionBatch, list[str]]:
    """Rescaled refractive index, closed 8-element composition, glass category."""
    ds = load_csv(path, GLASS_ROLES)
    return ds.response(), ds.composition_batch(), ds.factor_labels()


def load_foraminiferal(
    path: str | Path, verify_checksum: bool = True
) -> tuple[CompositionBatch, DesignMatrix]:
    """Species compositions and a log-depth design from the transcribed CSV.

    The file needs a ``depth`` column (metres, entered as a log covariate);
    every other column is read as one species of the composition, in file
    order, so the transcriber may keep the source's species names.
    """
    path = Path(path)
    if verify_checksum and FORAM_SHA256 is not None:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        if digest != FORAM_SHA256:
            raise DataError(
                f"{path}: sha256 {digest} does not match the pinned transcription"
            )
    with path.open(encoding="utf-8") as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    species = [c for c in header if c != "depth"]
    if "depth" not in header or len(species) < 2:
        raise DataError(f"{path}: expected a depth column plus species columns")
    ds = load_csv(path, f"logcovariate=depth;composition={','.join(species)}")
    return ds.composition_batch(), ds.design_matrix()
