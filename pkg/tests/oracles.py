"""Independent brute-force references used by the test suite.

Everything here is deliberately slow and dumb: direct SSE computations and
exhaustive enumeration, sharing no code with the library's split search.
"""

from __future__ import annotations

import numpy as np

from diffboost.tree import CATEGORICAL


def _sse(y):
    if y.shape[0] == 0:
        return 0.0
    return float(((y - y.mean()) ** 2).sum())


def _gain_for_mask(y, left_mask, msl):
    n_l = int(left_mask.sum())
    n_r = y.shape[0] - n_l
    if n_l < msl or n_r < msl or n_l == 0 or n_r == 0:
        return None
    return _sse(y) - _sse(y[left_mask]) - _sse(y[~left_mask])


def brute_force_root_gain(X, y, kinds, msl):
    """Max SSE reduction over every (feature, rule, default-direction) candidate.

    Numeric rules are thresholds between consecutive distinct present values
    plus the two cuts that isolate missing rows; categorical rules are the
    prefixes of the mean-target category ordering.  Returns 0.0 when no legal
    split exists.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    best = 0.0
    for f in range(p):
        col = X[:, f]
        is_cat = kinds[f] == CATEGORICAL
        miss = np.isnan(col) | (is_cat & (col < 0))
        present = col[~miss]
        if present.shape[0] == 0:
            continue
        rules = []
        if is_cat:
            codes = present.astype(np.int64)
            uniq = np.unique(codes)
            means = np.array([y[~miss][codes == c].mean() for c in uniq])
            order = uniq[np.lexsort((uniq, means))]
            for g in range(1, len(order)):
                left = set(order[:g].tolist())
                rules.append(("cat", left))
            if miss.any():
                rules.append(("cat", set()))
                rules.append(("cat", set(order.tolist())))
        else:
            vals = np.unique(present)
            for a, b in zip(vals[:-1], vals[1:]):
                thr = 0.5 * (a + b)
                if thr >= b:
                    thr = a
                rules.append(("num", thr))
            if miss.any():
                rules.append(("num", -np.inf))
                rules.append(("num", float(vals[-1])))
        for kind, payload in rules:
            if kind == "num":
                with np.errstate(invalid="ignore"):
                    base = col <= payload
            else:
                base = np.zeros(n, dtype=bool)
                if payload:
                    base[~miss] = np.isin(present.astype(np.int64), sorted(payload))
            for default_left in (True, False):
                left = base.copy()
                left[miss] = default_left
                g = _gain_for_mask(y, left, msl)
                if g is not None and g > best:
                    best = g
    return best


def random_small_dataset(rng):
    """Random tiny table with categoricals and missing cells, for oracle checks."""
    msl = int(rng.choice([1, 2, 5]))
    n = int(rng.integers(max(8, 2 * msl), 51))
    p = int(rng.integers(1, 4))
    kinds = [CATEGORICAL if rng.random() < 0.4 else "numeric" for _ in range(p)]
    X = np.empty((n, p))
    for f in range(p):
        if kinds[f] == CATEGORICAL:
            X[:, f] = rng.integers(0, rng.integers(2, 7), size=n).astype(float)
        elif rng.random() < 0.5:
            X[:, f] = rng.choice([0.0, 1.0, 2.5, 7.0], size=n)   # heavy ties
        else:
            X[:, f] = rng.normal(size=n)
        miss_rate = float(rng.choice([0.0, 0.2, 0.4]))
        if miss_rate > 0:
            X[rng.random(n) < miss_rate, f] = np.nan
    if rng.random() < 0.3:
        y = rng.integers(0, 3, size=n).astype(float)
    else:
        y = rng.normal(size=n)
    return X, y, kinds, msl
