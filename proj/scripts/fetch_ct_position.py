#!/usr/bin/env python3
"""Fetch the CT Position dataset (UCI "relative location of CT slices").

Downloads the zip from the UCI archive, extracts
slice_localization_data.csv into data/, and writes a dataset manifest with
the file checksum used by the run configs. Standard library only.

Usage: python3 scripts/fetch_ct_position.py [--dest data/]
"""

import argparse
import io
import json
import pathlib
import sys
import urllib.request
import zipfile

URLS = [
    "https://archive.ics.uci.edu/static/public/206/relative+location+of+ct+slices+on+axial+axis.zip",
    "https://archive.ics.uci.edu/ml/machine-learning-databases/00206/slice_localization_data.zip",
]
CSV_NAME = "slice_localization_data.csv"


def fnv1a64(path: pathlib.Path) -> str:
    """Matches hlreg's file_checksum (FNV-1a 64 over the file bytes)."""
    h = 0xCBF29CE484222325
    with open(path, "rb") as fh:
        while chunk := fh.read(1 << 20):
            for b in chunk:
                h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def download() -> bytes:
    last_error = None
    for url in URLS:
        try:
            print(f"downloading {url}")
            with urllib.request.urlopen(url, timeout=120) as resp:
                return resp.read()
        except Exception as e:  # noqa: BLE001 - report and try the mirror
            print(f"  failed: {e}")
            last_error = e
    raise SystemExit(f"could not download the dataset: {last_error}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", default="data", help="output directory")
    args = parser.parse_args()

    dest = pathlib.Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    csv_path = dest / CSV_NAME

    if not csv_path.exists():
        blob = download()
        with zipfile.ZipFile(io.BytesIO(blob)) as zf:
            member = next(n for n in zf.namelist() if n.endswith(".csv"))
            with zf.open(member) as src, open(csv_path, "wb") as out:
                out.write(src.read())
        print(f"wrote {csv_path}")
    else:
        print(f"{csv_path} already present")

    manifest = {
        "name": "ct-position",
        "path": str(csv_path),
        "target_column": "reference",
        "drop_columns": ["patientId"],
        "delimiter": ",",
        "header": True,
        "checksum": fnv1a64(csv_path),
    }
    manifest_path = dest / "ct_position_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {manifest_path}")

    rows = sum(1 for _ in open(csv_path)) - 1
    print(f"{rows} data rows")
    if rows != 53500:
        print("warning: expected 53500 rows", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
