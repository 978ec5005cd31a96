#!/usr/bin/env python3
"""Download the benchmark regression datasets and normalize them to CSV.

Each output file is plain numeric CSV with the feature columns first and
the regression target as the last column, named <key>.csv in the target
directory (default ./data, or $TINYDE_DATA_DIR).  Run:

    python scripts/fetch_uci.py [--dest DIR] [keys ...]

Spreadsheet-shaped sources (concrete, energy) need ``pandas`` plus
``xlrd``/``openpyxl``; everything else uses only the standard library.
Network access is required; nothing in the library itself downloads.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import urllib.request
import zipfile

UCI = "https://archive.ics.uci.edu/static/public"

SOURCES = {
    "boston": {
        "url": "http://lib.stat.cmu.edu/datasets/boston",
        "note": "506 rows, 13 features, target MEDV",
    },
    "concrete": {
        "url": f"{UCI}/165/concrete+compressive+strength.zip",
        "member": "Concrete_Data.xls",
        "note": "1030 rows, 8 features, target compressive strength",
    },
    "energy": {
        "url": f"{UCI}/242/energy+efficiency.zip",
        "member": "ENB2012_data.xlsx",
        "note": "768 rows, 8 features; heating load (first target) kept",
    },
    "kin8nm": {
        "url": "https://www.openml.org/data/get_csv/3626/dataset_2175_kin8nm.arff",
        "note": "8192 rows, 8 features, target y",
    },
    "naval": {
        "url": f"{UCI}/316/condition+based+maintenance+of+naval+propulsion+plants.zip",
        "member": "UCI CBM Dataset/data.txt",
        "note": "11934 rows, 16 features; compressor decay coefficient kept",
    },
    "power": {
        "url": f"{UCI}/294/combined+cycle+power+plant.zip",
        "member": "CCPP/Folds5x2_pp.xlsx",
        "note": "9568 rows, 4 features, target PE",
    },
    "protein": {
        "url": f"{UCI}/265/physicochemical+properties+of+protein+tertiary+structure.zip",
        "member": "CASP.csv",
        "note": "45730 rows, 9 features; RMSD (first column) moved last",
    },
    "wine": {
        "url": f"{UCI}/186/wine+quality.zip",
        "member": "winequality-red.csv",
        "note": "1599 rows, 11 features, target quality",
    },
    "yacht": {
        "url": f"{UCI}/243/yacht+hydrodynamics.zip",
        "member": "yacht_hydrodynamics.data",
        "note": "308 rows, 6 features, target residuary resistance",
    },
    "year": {
        "url": f"{UCI}/203/yearpredictionmsd.zip",
        "member": "YearPredictionMSD.txt",
        "note": "515345 rows, 90 features; year (first column) moved last",
    },
}


def fetch(url: str) -> bytes:
    print(f"  downloading {url}")
    with urllib.request.urlopen(url) as resp:
        return resp.read()


def zip_member(blob: bytes, member: str) -> bytes:
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        return zf.read(member)


def write_rows(dest: str, rows) -> None:
    with open(dest, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def rows_from_excel(blob: bytes, suffix: str, usecols=None):
    import pandas as pd
    df = pd.read_excel(io.BytesIO(blob), usecols=usecols)
    return df.dropna(how="all").values.tolist()


def convert(key: str, dest: str) -> None:
    src = SOURCES[key]
    blob = fetch(src["url"])
    if key == "boston":
        # header prose followed by rows wrapped across line pairs
        lines = blob.decode().splitlines()[22:]
        vals = " ".join(lines).split()
        rows = [vals[i:i + 14] for i in range(0, len(vals), 14)]
    elif key == "concrete":
        rows = rows_from_excel(zip_member(blob, src["member"]), ".xls")
    elif key == "energy":
        # 8 features, keep heating load (Y1), drop cooling load (Y2)
        rows = rows_from_excel(zip_member(blob, src["member"]), ".xlsx")
        rows = [r[:9] for r in rows]
    elif key == "kin8nm":
        text = blob.decode().splitlines()
        rows = [line.split(",") for line in text[1:] if line.strip()]
    elif key == "naval":
        # 16 features then two decay targets; keep the compressor one
        text = zip_member(blob, src["member"]).decode()
        rows = [line.split()[:17] for line in text.splitlines() if line.strip()]
    elif key == "power":
        rows = rows_from_excel(zip_member(blob, src["member"]), ".xlsx")
    elif key == "protein":
        text = zip_member(blob, src["member"]).decode().splitlines()
        rows = [line.split(",")[1:] + [line.split(",")[0]]
                for line in text[1:] if line.strip()]
    elif key == "wine":
        text = zip_member(blob, src["member"]).decode().splitlines()
        rows = [line.split(";") for line in text[1:] if line.strip()]
    elif key == "yacht":
        text = zip_member(blob, src["member"]).decode()
        rows = [line.split() for line in text.splitlines() if line.strip()]
    elif key == "year":
        text = zip_member(blob, src["member"]).decode().splitlines()
        rows = [line.split(",")[1:] + [line.split(",")[0]]
                for line in text if line.strip()]
    else:
        raise KeyError(key)
    write_rows(dest, rows)
    print(f"  wrote {dest} ({len(rows)} rows): {src['note']}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("keys", nargs="*", default=[],
                        help=f"dataset keys (default: all of {sorted(SOURCES)})")
    parser.add_argument("--dest",
                        default=os.environ.get("TINYDE_DATA_DIR", "data"))
    args = parser.parse_args()
    keys = args.keys or sorted(SOURCES)
    os.makedirs(args.dest, exist_ok=True)
    failures = []
    for key in keys:
        if key not in SOURCES:
            print(f"unknown dataset key {key!r}", file=sys.stderr)
            return 2
        print(f"{key}:")
        try:
            convert(key, os.path.join(args.dest, f"{key}.csv"))
        except Exception as exc:  # noqa: BLE001 - report and continue
            print(f"  FAILED: {exc}", file=sys.stderr)
            failures.append(key)
    if failures:
        print(f"failed: {failures}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
