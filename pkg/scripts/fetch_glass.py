#!/usr/bin/env python3
"""Fetch the UCI forensic glass data and write the working CSV.

Downloads glass.data from the UCI Machine Learning Repository (or converts a
local copy passed with --from-file), drops the Id column, rescales the
refractive index to 1000 * (RI - 1.518), maps type codes to level names, and
writes data/glass.csv. Needs network access unless --from-file is given.
"""

import argparse
import sys
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from compreg.datasets import GLASS_URL, normalize_uci_glass  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--from-file",
        help="path to an already-downloaded glass.data instead of fetching",
    )
    parser.add_argument(
        "--dest",
        default=str(Path(__file__).resolve().parents[1] / "data" / "glass.csv"),
        help="output CSV path (default: data/glass.csv)",
    )
    args = parser.parse_args()

    if args.from_file:
        raw = Path(args.from_file).read_text(encoding="utf-8")
    else:
        print(f"fetching {GLASS_URL}")
        with urllib.request.urlopen(GLASS_URL, timeout=60) as response:
            raw = response.read().decode("utf-8")

    csv_text = normalize_uci_glass(raw)
    dest = Path(args.dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(csv_text, encoding="utf-8")
    n_rows = csv_text.count("\n") - 1
    print(f"wrote {dest} ({n_rows} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
