"""Fetch the two benchmark regression datasets used by the acceptance suite.

Downloads need network access; the files land in data/uci/ as plain CSVs with
header rows and the response in the last column:

  boston.csv  506 rows, 13 features + medv
  wine.csv   1599 rows, 11 features + quality

Each download is validated structurally against the protocol's published
(N, P) shape, value sanity ranges are checked, and the SHA-256 of the raw
download is printed so it can be pinned with --expect-boston / --expect-wine
on later runs.

Usage:
    python demos/fetch_uci.py [--out-dir data/uci]
"""

import argparse
import csv
import hashlib
import sys
import urllib.request
from pathlib import Path

BOSTON_URL = ("https://archive.ics.uci.edu/ml/machine-learning-databases/"
              "housing/housing.data")
WINE_URL = ("https://archive.ics.uci.edu/ml/machine-learning-databases/"
            "wine-quality/winequality-red.csv")

BOSTON_COLUMNS = ["crim", "zn", "indus", "chas", "nox", "rm", "age", "dis",
                  "rad", "tax", "ptratio", "b", "lstat", "medv"]


def _download(url):
    print(f"fetching {url}")
    with urllib.request.urlopen(url, timeout=60) as resp:
        raw = resp.read()
    print(f"  {len(raw)} bytes, sha256 {hashlib.sha256(raw).hexdigest()}")
    return raw


def fetch_boston(out_dir, expect_sha=None):
    raw = _download(BOSTON_URL)
    if expect_sha and hashlib.sha256(raw).hexdigest() != expect_sha:
        sys.exit("boston: sha256 mismatch")
    rows = []
    for line in raw.decode().splitlines():
        parts = line.split()
        if parts:
            rows.append([float(v) for v in parts])
    if len(rows) != 506 or any(len(r) != 14 for r in rows):
        sys.exit(f"boston: expected 506 rows x 14 columns, got {len(rows)}")
    medv = [r[-1] for r in rows]
    if not (1.0 <= min(medv) and max(medv) <= 60.0):
        sys.exit("boston: response values out of the documented range")
    path = out_dir / "boston.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BOSTON_COLUMNS)
        w.writerows(rows)
    print(f"  wrote {path}")


def fetch_wine(out_dir, expect_sha=None):
    raw = _download(WINE_URL)
    if expect_sha and hashlib.sha256(raw).hexdigest() != expect_sha:
        sys.exit("wine: sha256 mismatch")
    lines = raw.decode().splitlines()
    header = [h.strip().strip('"').replace(" ", "_") for h in lines[0].split(";")]
    rows = [[float(v) for v in line.split(";")] for line in lines[1:] if line.strip()]
    if len(rows) != 1599 or any(len(r) != 12 for r in rows):
        sys.exit(f"wine: expected 1599 rows x 12 columns, got {len(rows)}")
    quality = [r[-1] for r in rows]
    if not (0 <= min(quality) and max(quality) <= 10):
        sys.exit("wine: response values out of the documented range")
    path = out_dir / "wine.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    print(f"  wrote {path}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="data/uci")
    ap.add_argument("--expect-boston", help="pinned sha256 of the raw download")
    ap.add_argument("--expect-wine", help="pinned sha256 of the raw download")
    args = ap.parse_args()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fetch_boston(out_dir, args.expect_boston)
    fetch_wine(out_dir, args.expect_wine)


if __name__ == "__main__":
    main()
