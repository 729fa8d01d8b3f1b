"""Tabular dataset handling: typed columns, CSV round-trips, splits, masking,
and the synthetic generators used throughout the test and demo protocols.

A Dataset stores features as one float64 matrix.  Missing cells are NaN (a
first-class cell state, never a sentinel number).  Categorical cells hold
dictionary codes; the dictionary preserves first-appearance order, and code -1
is reserved for categories unseen at encoding time.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .tree import CATEGORICAL, NUMERIC

__all__ = [
    "Column", "Dataset", "SplitSpec", "Transform", "DataError",
    "load_csv", "save_csv", "make_split", "standardize", "mcar_mask",
    "toy_generate", "clf_toy_generate", "reencode",
    "TOY_SEGMENT_NOISE", "toy_a_segment_mean", "toy_b_boxes",
]


class DataError(ValueError):
    """Malformed or inconsistent tabular data."""


@dataclass(frozen=True)
class Column:
    name: str
    kind: str                                   # NUMERIC or CATEGORICAL
    categories: Optional[tuple] = None          # dictionary, first-appearance order

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise DataError(f"unknown column kind {self.kind!r}")
        if (self.kind == CATEGORICAL) != (self.categories is not None):
            raise DataError(f"column {self.name!r}: categories iff categorical")


@dataclass(frozen=True)
class Dataset:
    name: str
    columns: tuple                              # of Column
    X: np.ndarray                               # (n, p) float64, NaN = missing
    y: np.ndarray                               # (n,) float64
    response_name: str = "y"

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DataError("feature matrix and response must align")
        if len(self.columns) != self.X.shape[1]:
            raise DataError("column metadata does not match feature count")
        self.X.setflags(write=False)
        self.y.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def kinds(self) -> list:
        return [c.kind for c in self.columns]

    def subset(self, rows: np.ndarray, name: Optional[str] = None) -> "Dataset":
        return replace(self, name=name or self.name,
                       X=self.X[rows].copy(), y=self.y[rows].copy())


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    fold_seed: int = 0
    fold_index: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class Transform:
    """Train-split statistics used to standardize features and response."""
    feature_mean: np.ndarray
    feature_std: np.ndarray      # NaN entries mark untouched (categorical) columns
    response_mean: float
    response_std: float

    def invert_response(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values) * self.response_std + self.response_mean


# ---------------------------------------------------------------------------
# CSV in/out

def _parse_number(cell: str):
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(path, schema_hint: Optional[dict] = None, *, missing_sentinel: str = "NA",
             delimiter: str = ",", response: Optional[str] = None,
             name: Optional[str] = None) -> Dataset:
    """Read a CSV with a header row; the last column is the response unless
    ``response`` names another one.

    A column is numeric when every non-missing cell parses as a number, else
    categorical.  Empty cells and ``missing_sentinel`` are missing.  A sidecar
    schema file (``<path>.schema``) written by :func:`save_csv` fixes kinds and
    dictionary order; ``schema_hint`` ({column name: kind}) overrides inference.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        raw_rows = list(reader)
    if not raw_rows:
        raise DataError(f"{path}: no data rows")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    width = len(header)
    for i, row in enumerate(raw_rows):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, expected {width}")

    response_name = response if response is not None else header[-1]
    if response_name not in header:
        raise DataError(f"{path}: response column {response_name!r} not in header")
    r_idx = header.index(response_name)
    feat_names = [h for j, h in enumerate(header) if j != r_idx]

    sidecar = _read_schema(Path(str(path) + ".schema")) if schema_hint is None else None

    def decide_kind(col_name, cells):
        if schema_hint is not None and col_name in schema_hint:
            return schema_hint[col_name], None
        if sidecar is not None and col_name in sidecar:
            kind, cats = sidecar[col_name]
            return kind, cats
        numeric = all(_parse_number(c) is not None
                      for c in cells if c not in ("", missing_sentinel))
        return (NUMERIC if numeric else CATEGORICAL), None

    n = len(raw_rows)
    X = np.empty((n, width - 1))
    columns = []
    for j, col_name in enumerate(feat_names):
        src = header.index(col_name)
        cells = [row[src] for row in raw_rows]
        kind, fixed_cats = decide_kind(col_name, cells)
        if kind == NUMERIC:
            for i, c in enumerate(cells):
                if c in ("", missing_sentinel):
                    X[i, j] = np.nan
                else:
                    v = _parse_number(c)
                    if v is None or math.isinf(v):
                        raise DataError(
                            f"{path}: column {col_name!r} row {i + 2}: {c!r} is not "
                            "a finite number")
                    X[i, j] = v
            columns.append(Column(col_name, NUMERIC))
        else:
            if fixed_cats is not None:
                lookup = {c: k for k, c in enumerate(fixed_cats)}
                cats = list(fixed_cats)
                frozen = True
            else:
                lookup, cats, frozen = {}, [], False
            for i, c in enumerate(cells):
                if c in ("", missing_sentinel):
                    X[i, j] = np.nan
                elif c in lookup:
                    X[i, j] = lookup[c]
                elif frozen:
                    X[i, j] = -1.0          # unseen under a fixed dictionary
                else:
                    lookup[c] = len(cats)
                    cats.append(c)
                    X[i, j] = lookup[c]
            columns.append(Column(col_name, CATEGORICAL, tuple(cats)))

    y = np.empty(n)
    for i, row in enumerate(raw_rows):
        v = _parse_number(row[r_idx])
        if v is None:
            raise DataError(
                f"{path}: response {response_name!r} row {i + 2}: {row[r_idx]!r} is not numeric")
        y[i] = v

    return Dataset(name=name or path.stem, columns=tuple(columns), X=X, y=y,
                   response_name=response_name)


def save_csv(ds: Dataset, path, *, missing_sentinel: str = "NA", delimiter: str = ",",
             write_schema: bool = True) -> None:
    """Write the dataset as CSV plus a ``<path>.schema`` sidecar fixing kinds
    and dictionary order, so a reload reproduces the dataset exactly."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow([c.name for c in ds.columns] + [ds.response_name])
        for i in range(ds.n_rows):
            row = []
            for j, col in enumerate(ds.columns):
                v = ds.X[i, j]
                if math.isnan(v):
                    row.append(missing_sentinel)
                elif col.kind == CATEGORICAL:
                    row.append(col.categories[int(v)] if v >= 0 else missing_sentinel)
                else:
                    row.append(repr(float(v)))
            row.append(repr(float(ds.y[i])))
            writer.writerow(row)
    if write_schema:
        _write_schema(ds, Path(str(path) + ".schema"))


def _write_schema(ds: Dataset, path: Path) -> None:
    lines = [f"response={ds.response_name}"]
    for j, col in enumerate(ds.columns):
        lines.append(f"column.{j}.name={col.name}")
        lines.append(f"column.{j}.kind={col.kind}")
        if col.kind == CATEGORICAL:
            for k, cat in enumerate(col.categories):
                lines.append(f"column.{j}.category.{k}={cat}")
    path.write_text("\n".join(lines) + "\n")


def _read_schema(path: Path):
    if not path.exists():
        return None
    fields: dict = {}
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        fields[key] = value
    out = {}
    j = 0
    while f"column.{j}.name" in fields:
        cname = fields[f"column.{j}.name"]
        kind = fields[f"column.{j}.kind"]
        if kind == CATEGORICAL:
            cats = []
            k = 0
            while f"column.{j}.category.{k}" in fields:
                cats.append(fields[f"column.{j}.category.{k}"])
                k += 1
            out[cname] = (kind, tuple(cats))
        else:
            out[cname] = (kind, None)
        j += 1
    return out


def reencode(ds: Dataset, columns: Sequence[Column]) -> np.ndarray:
    """Map a dataset's features onto another schema's encoding.

    Columns are matched by name and kind; categorical cells are translated
    through the target dictionaries, with unseen categories becoming code -1.
    Raises :class:`DataError` naming the first offending column.
    """
    by_name = {c.name: j for j, c in enumerate(ds.columns)}
    out = np.empty((ds.n_rows, len(columns)))
    for j, target in enumerate(columns):
        if target.name not in by_name:
            raise DataError(f"missing column {target.name!r}")
        src_j = by_name[target.name]
        src = ds.columns[src_j]
        if src.kind != target.kind:
            raise DataError(
                f"column {target.name!r} is {src.kind}, expected {target.kind}")
        col = ds.X[:, src_j]
        if target.kind == NUMERIC:
            out[:, j] = col
        else:
            code_map = {c: k for k, c in enumerate(target.categories)}
            trans = np.array([code_map.get(c, -1) for c in src.categories], dtype=float)
            known = ~np.isnan(col) & (col >= 0)
            out[:, j] = np.nan
            out[known, j] = trans[col[known].astype(np.int64)]
            out[~np.isnan(col) & (col < 0), j] = -1.0
    return out


# ---------------------------------------------------------------------------
# splits, standardization, masking

def make_split(ds: Dataset, spec: SplitSpec):
    """Deterministic shuffled split; the first ``train_fraction`` rows train."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.fold_seed, spec.fold_index]))
    perm = rng.permutation(ds.n_rows)
    n_train = int(spec.train_fraction * ds.n_rows)
    train = ds.subset(perm[:n_train], name=f"{ds.name}/train{spec.fold_index}")
    test = ds.subset(perm[n_train:], name=f"{ds.name}/test{spec.fold_index}")
    return train, test


def standardize(train: Dataset, test: Dataset, *, include_response: bool = True):
    """Standardize numeric features (and optionally the response) by train
    statistics; categorical columns and missing cells are untouched.
    Returns (train', test', Transform)."""
    p = train.n_features
    mean = np.full(p, np.nan)
    std = np.full(p, np.nan)
    new_train = train.X.copy()
    new_test = test.X.copy()
    for j, col in enumerate(train.columns):
        if col.kind != NUMERIC:
            continue
        cells = train.X[:, j]
        present = ~np.isnan(cells)
        if not present.any():
            continue
        m = float(cells[present].mean())
        s = max(float(cells[present].std()), 1e-8)
        mean[j], std[j] = m, s
        new_train[:, j] = (train.X[:, j] - m) / s
        new_test[:, j] = (test.X[:, j] - m) / s
    if include_response:
        r_mean = float(train.y.mean())
        r_std = max(float(train.y.std()), 1e-8)
    else:
        r_mean, r_std = 0.0, 1.0
    tf = Transform(feature_mean=mean, feature_std=std,
                   response_mean=r_mean, response_std=r_std)
    train2 = replace(train, X=new_train, y=(train.y - r_mean) / r_std)
    test2 = replace(test, X=new_test, y=(test.y - r_mean) / r_std)
    return train2, test2, tf


def mcar_mask(ds: Dataset, rate: float, seed: int) -> Dataset:
    """Set each feature cell to missing independently with probability ``rate``.
    The response is never masked."""
    if not 0.0 <= rate < 1.0:
        raise DataError("rate must lie in [0, 1)")
    if rate == 0.0:
        return ds
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    X = ds.X.copy()
    X[rng.random(X.shape) < rate] = np.nan
    return replace(ds, X=X)


# ---------------------------------------------------------------------------
# synthetic generators

TOY_SEGMENT_NOISE = 0.3
_TOY_A_OFFSETS = (0.0, 4.0, -4.0)
_TOY_B_BOXES = (((0.0, 1.0), (3.0, 4.0)),
                ((5.0, 6.0), (8.0, 9.0)),
                ((-4.0, -3.0), (-1.0, 0.0)))


def toy_a_segment_mean(u):
    """Noise-free regression surface of toy task a."""
    u = np.asarray(u, dtype=float)
    seg = np.clip(np.floor(u).astype(int), 0, 2)
    return 0.5 * u + np.asarray(_TOY_A_OFFSETS)[seg]


def toy_b_boxes(sub: int):
    """The two uniform response boxes of subinterval ``sub`` in tasks b/c."""
    return _TOY_B_BOXES[sub]


def toy_generate(task: str, n: int, seed: int) -> Dataset:
    """Synthetic regression tasks with distinct conditional-distribution shapes.

    a: three disjoint linear segments plus Gaussian noise, with two noisy
       near-copies of the driving covariate (so cells can go missing without
       destroying the signal);
    b: three covariate subintervals, each with a bimodal (two uniform boxes)
       response;  c: task b's generator at one fifth of the rows;
    d: sine / constant / quadratic segments plus Gaussian noise;
    e: linear trend with noise scale growing linearly in the covariate.
    """
    if n < 1:
        raise DataError("n must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, ord(task[0])]))
    if task == "a":
        u = rng.uniform(0.0, 3.0, size=n)
        y = toy_a_segment_mean(u) + rng.normal(scale=TOY_SEGMENT_NOISE, size=n)
        X = np.column_stack([
            u,
            u + rng.normal(scale=0.01, size=n),
            u + rng.normal(scale=0.01, size=n),
        ])
        cols = tuple(Column(f"x{j}", NUMERIC) for j in range(3))
        return Dataset("toy_a", cols, X, y)
    if task in ("b", "c"):
        m = n if task == "b" else max(1, n // 5)
        u = rng.uniform(0.0, 3.0, size=m)
        sub = np.clip(np.floor(u).astype(int), 0, 2)
        pick_high = rng.random(m) < 0.5
        lo_box = np.array([_TOY_B_BOXES[s][0] for s in sub])
        hi_box = np.array([_TOY_B_BOXES[s][1] for s in sub])
        box = np.where(pick_high[:, None], hi_box, lo_box)
        y = rng.uniform(box[:, 0], box[:, 1])
        return Dataset(f"toy_{task}", (Column("x0", NUMERIC),), u[:, None], y)
    if task == "d":
        u = rng.uniform(0.0, 3.0, size=n)
        seg = np.clip(np.floor(u).astype(int), 0, 2)
        base = np.where(seg == 0, 2.0 * np.sin(2.0 * np.pi * u),
                        np.where(seg == 1, 4.0, 6.0 + 3.0 * (u - 2.0) ** 2))
        y = base + rng.normal(scale=0.25, size=n)
        return Dataset("toy_d", (Column("x0", NUMERIC),), u[:, None], y)
    if task == "e":
        u = rng.uniform(0.0, 2.0, size=n)
        y = 1.0 + 2.0 * u + (0.1 + 0.5 * u) * rng.normal(size=n)
        return Dataset("toy_e", (Column("x0", NUMERIC),), u[:, None], y)
    raise DataError(f"unknown toy task {task!r}")


def clf_toy_generate(n: int, seed: int, *, noisy_error: float = 0.25,
                     positive_rate: float = 0.5, noisy_fraction: float = 0.5) -> Dataset:
    """Binary task with a separable clean region and a noisy region of known
    accuracy ceiling.

    Rows with ``x0 < 1`` lie in the clean region, where the informative
    feature ``x1`` encodes the label exactly.  In the noisy region ``x1``
    encodes a label flipped with probability ``noisy_error``, so the best
    attainable accuracy there is ``1 - noisy_error``.
    """
    if n < 2:
        raise DataError("n must be >= 2")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 99]))
    noisy = rng.random(n) < noisy_fraction
    x0 = rng.uniform(0.0, 1.0, size=n) + noisy
    y = (rng.random(n) < positive_rate).astype(float)
    flipped = np.where(noisy & (rng.random(n) < noisy_error), 1.0 - y, y)
    x1 = flipped + rng.uniform(0.0, 0.4, size=n)
    X = np.column_stack([x0, x1])
    cols = (Column("x0", NUMERIC), Column("x1", NUMERIC))
    return Dataset("clf_toy", cols, X, y, response_name="label")
