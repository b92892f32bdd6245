"""Hot numeric kernels with optional jit compilation.

Loop kernels are written once in plain Python and compiled with numba when
available. Vectorized numpy fallbacks keep the package fully functional
without a compiler. Backend selection happens once at import time via the
RULEDFS_NUMBA environment variable:

    RULEDFS_NUMBA=0   force the numpy fallbacks
    RULEDFS_NUMBA=1   require numba, fail loudly if it cannot be imported
    unset or other    use numba when importable, fall back silently

Both backends must produce bit-identical outputs; the test suite and
``benchmarks/bench_kernels.py`` compare them directly.

Condition encoding shared with the rules module (parallel arrays, one row
per condition, CSR rule pointers):

    kind 0: value <= p1
    kind 1: value >  p0
    kind 2: p0 <  value <= p1   (tree-path interval)
    kind 3: p0 <= value <= p1   (closed interval)
    kind 4: trapezoidal membership over (p0, p1, p2, p3); triangle when p1 == p2

Unobserved features contribute factor 1 and their stored value is never read.
"""

from __future__ import annotations

import os

import numpy as np

K_LE = 0
K_GT = 1
K_OPEN_INTERVAL = 2
K_CLOSED_INTERVAL = 3
K_FUZZY = 4


# ---------------------------------------------------------------------------
# loop kernels  (compiled with numba when the backend allows it)
# ---------------------------------------------------------------------------

def _py_cond(kind, v, a, b, c, d):
    if kind == K_LE:
        return 1.0 if v <= b else 0.0
    if kind == K_GT:
        return 1.0 if v > a else 0.0
    if kind == K_OPEN_INTERVAL:
        return 1.0 if (a < v and v <= b) else 0.0
    if kind == K_CLOSED_INTERVAL:
        return 1.0 if (a <= v and v <= b) else 0.0
    # trapezoid: zero outside [a, d], one on [b, c], linear ramps between;
    # the branch structure guarantees every taken ramp has a positive denominator
    if v < a or v > d:
        return 0.0
    if v < b:
        return (v - a) / (b - a)
    if v <= c:
        return 1.0
    return (d - v) / (d - c)


_cond = _py_cond  # rebound to the jitted version when numba is active


def _py_truth_degrees(values, mask, ptr, feat, kind, p0, p1, p2, p3):
    n_rules = ptr.shape[0] - 1
    out = np.empty(n_rules, np.float64)
    for r in range(n_rules):
        d = 1.0
        for ci in range(ptr[r], ptr[r + 1]):
            f = feat[ci]
            if not mask[f]:
                continue
            d *= _cond(kind[ci], values[f], p0[ci], p1[ci], p2[ci], p3[ci])
            if d == 0.0:
                break
        out[r] = d
    return out


def _py_truth_degrees_matrix(X, ptr, feat, kind, p0, p1, p2, p3):
    # full-observation batch evaluation, one row per sample
    n = X.shape[0]
    n_rules = ptr.shape[0] - 1
    out = np.empty((n, n_rules), np.float64)
    for s in range(n):
        for r in range(n_rules):
            d = 1.0
            for ci in range(ptr[r], ptr[r + 1]):
                d *= _cond(kind[ci], X[s, feat[ci]], p0[ci], p1[ci], p2[ci], p3[ci])
                if d == 0.0:
                    break
            out[s, r] = d
    return out


def _py_ensemble_winner_idx(values, mask, model_ptr, ptr, feat, kind, p0, p1, p2, p3):
    # winner rule per model over stacked rule arrays; -1 when nothing fires.
    # Maximum scan keeps the first (lowest-index) rule on ties.
    n_models = model_ptr.shape[0] - 1
    out = np.empty(n_models, np.int64)
    for m in range(n_models):
        best_r = -1
        best_d = 0.0
        for r in range(model_ptr[m], model_ptr[m + 1]):
            d = 1.0
            for ci in range(ptr[r], ptr[r + 1]):
                f = feat[ci]
                if not mask[f]:
                    continue
                d *= _cond(kind[ci], values[f], p0[ci], p1[ci], p2[ci], p3[ci])
                if d == 0.0:
                    break
            if d > best_d:
                best_d = d
                best_r = r
        out[m] = best_r
    return out


def _py_match_tally(train_bins, obs_cols, obs_vals, target, n_bins):
    # count bin occupancy of one feature among rows matching every observed bin
    counts = np.zeros(n_bins, np.int64)
    n_match = 0
    n_cond = obs_cols.shape[0]
    for r in range(train_bins.shape[0]):
        ok = True
        for j in range(n_cond):
            if train_bins[r, obs_cols[j]] != obs_vals[j]:
                ok = False
                break
        if ok:
            counts[train_bins[r, target]] += 1
            n_match += 1
    return counts, n_match


def _py_best_split(X, y, n_classes, min_leaf):
    """Exhaustive Gini split search for one tree node.

    Returns (feature, threshold, weighted child impurity, parent impurity);
    feature is -1 when no admissible split improves on the parent. Candidate
    thresholds are midpoints between adjacent distinct sorted values; the
    strict improvement scan keeps the lowest (feature, threshold) on ties.
    """
    n = X.shape[0]
    n_feat = X.shape[1]

    total = np.zeros(n_classes, np.int64)
    for s in range(n):
        total[y[s]] += 1
    acc = 0.0
    for c in range(n_classes):
        frac = total[c] / n
        acc += frac * frac
    parent = 1.0 - acc

    best_f = -1
    best_thr = np.nan
    best_w = np.inf
    if n < 2 * min_leaf or parent == 0.0:
        return best_f, best_thr, best_w, parent

    for f in range(n_feat):
        col = np.empty(n, np.float64)
        for s in range(n):
            col[s] = X[s, f]
        order = np.argsort(col)
        left = np.zeros(n_classes, np.int64)
        for i in range(n - 1):
            left[y[order[i]]] += 1
            if col[order[i + 1]] == col[order[i]]:
                continue
            ln = i + 1
            rn = n - ln
            if ln < min_leaf or rn < min_leaf:
                continue
            sl = 0.0
            sr = 0.0
            for c in range(n_classes):
                ql = left[c] / ln
                qr = (total[c] - left[c]) / rn
                sl += ql * ql
                sr += qr * qr
            w = (ln * (1.0 - sl) + rn * (1.0 - sr)) / n
            if w < best_w:
                best_w = w
                best_f = f
                best_thr = (col[order[i]] + col[order[i + 1]]) / 2.0
    if best_f >= 0 and not (best_w < parent):
        best_f = -1
        best_thr = np.nan
        best_w = np.inf
    return best_f, best_thr, best_w, parent


# ---------------------------------------------------------------------------
# vectorized numpy fallbacks
# ---------------------------------------------------------------------------

def _np_cond_values(v, kind, p0, p1, p2, p3):
    # elementwise condition values; v aligned with the condition arrays
    out = np.zeros(v.shape, np.float64)

    sel = kind == K_LE
    out[sel] = (v[sel] <= p1[sel]).astype(np.float64)
    sel = kind == K_GT
    out[sel] = (v[sel] > p0[sel]).astype(np.float64)
    sel = kind == K_OPEN_INTERVAL
    out[sel] = ((p0[sel] < v[sel]) & (v[sel] <= p1[sel])).astype(np.float64)
    sel = kind == K_CLOSED_INTERVAL
    out[sel] = ((p0[sel] <= v[sel]) & (v[sel] <= p1[sel])).astype(np.float64)

    sel = kind == K_FUZZY
    if np.any(sel):
        vf, a, b, c, d = v[sel], p0[sel], p1[sel], p2[sel], p3[sel]
        inside = (vf >= a) & (vf <= d)
        dl = np.where(b > a, b - a, 1.0)
        dr = np.where(d > c, d - c, 1.0)
        ramp_up = (vf - a) / dl
        ramp_dn = (d - vf) / dr
        mu = np.where(vf < b, ramp_up, np.where(vf <= c, 1.0, ramp_dn))
        out[sel] = np.where(inside, mu, 0.0)
    return out


def _np_rule_products(cv, ptr):
    # per-rule product of contiguous condition values; empty antecedent -> 1.
    # reduceat multiplies left to right, matching the loop kernel order. A
    # trailing 1.0 sentinel keeps every ptr index valid, so empty trailing
    # rules cannot shift a neighbor's segment.
    n_rules = ptr.shape[0] - 1
    if n_rules == 0:
        return np.ones(cv.shape[:-1] + (0,), np.float64)
    pad = np.ones(cv.shape[:-1] + (1,), np.float64)
    out = np.multiply.reduceat(np.concatenate([cv, pad], axis=-1), ptr[:-1], axis=-1)
    empty = ptr[:-1] == ptr[1:]
    if np.any(empty):
        out[..., empty] = 1.0
    return out


def _np_truth_degrees(values, mask, ptr, feat, kind, p0, p1, p2, p3):
    if feat.shape[0]:
        raw = _np_cond_values(values[feat], kind, p0, p1, p2, p3)
        cv = np.where(mask[feat], raw, 1.0)
    else:
        cv = np.ones(0, np.float64)
    return _np_rule_products(cv, ptr)


def _np_truth_degrees_matrix(X, ptr, feat, kind, p0, p1, p2, p3):
    n = X.shape[0]
    if feat.shape[0] == 0:
        return np.ones((n, ptr.shape[0] - 1), np.float64)
    flat = _np_cond_values(
        X[:, feat].ravel(),
        np.broadcast_to(kind, (n, kind.shape[0])).ravel(),
        np.broadcast_to(p0, (n, p0.shape[0])).ravel(),
        np.broadcast_to(p1, (n, p1.shape[0])).ravel(),
        np.broadcast_to(p2, (n, p2.shape[0])).ravel(),
        np.broadcast_to(p3, (n, p3.shape[0])).ravel(),
    )
    cv = flat.reshape(n, feat.shape[0])
    return _np_rule_products(cv, ptr)


def _np_ensemble_winner_idx(values, mask, model_ptr, ptr, feat, kind, p0, p1, p2, p3):
    deg = _np_truth_degrees(values, mask, ptr, feat, kind, p0, p1, p2, p3)
    n_models = model_ptr.shape[0] - 1
    out = np.empty(n_models, np.int64)
    for m in range(n_models):
        lo, hi = model_ptr[m], model_ptr[m + 1]
        seg = deg[lo:hi]
        if seg.shape[0] == 0:
            out[m] = -1
            continue
        j = int(np.argmax(seg))
        out[m] = lo + j if seg[j] > 0.0 else -1
    return out


def _np_match_tally(train_bins, obs_cols, obs_vals, target, n_bins):
    if obs_cols.shape[0]:
        matched = np.all(train_bins[:, obs_cols] == obs_vals[None, :], axis=1)
        hit = train_bins[matched, target]
    else:
        hit = train_bins[:, target]
    counts = np.bincount(hit, minlength=n_bins).astype(np.int64)
    return counts, int(hit.shape[0])


def _np_best_split(X, y, n_classes, min_leaf):
    # class sums accumulate sequentially (ascending class index) so that the
    # float results match the loop kernel bit for bit
    n = X.shape[0]
    total = np.bincount(y, minlength=n_classes).astype(np.int64)
    acc = 0.0
    for c in range(n_classes):
        frac = total[c] / n
        acc += frac * frac
    parent = 1.0 - acc

    best_f = -1
    best_thr = np.nan
    best_w = np.inf
    if n < 2 * min_leaf or parent == 0.0:
        return best_f, best_thr, best_w, parent

    onehot = (y[:, None] == np.arange(n_classes)[None, :]).astype(np.int64)
    for f in range(X.shape[1]):
        col = X[:, f].copy()
        order = np.argsort(col)
        xs = col[order]
        left = np.cumsum(onehot[order], axis=0)[:-1]
        ln = np.arange(1, n, dtype=np.float64)
        rn = n - ln
        valid = (xs[1:] > xs[:-1]) & (ln >= min_leaf) & (rn >= min_leaf)
        if not np.any(valid):
            continue
        sl = np.zeros(n - 1, np.float64)
        sr = np.zeros(n - 1, np.float64)
        for c in range(n_classes):
            ql = left[:, c] / ln
            qr = (total[c] - left[:, c]) / rn
            sl += ql * ql
            sr += qr * qr
        w = (ln * (1.0 - sl) + rn * (1.0 - sr)) / n
        idx = np.flatnonzero(valid)
        j = idx[int(np.argmin(w[idx]))]
        if w[j] < best_w:
            best_w = float(w[j])
            best_f = f
            best_thr = float((xs[j] + xs[j + 1]) / 2.0)
    if best_f >= 0 and not (best_w < parent):
        best_f = -1
        best_thr = np.nan
        best_w = np.inf
    return best_f, best_thr, best_w, float(parent)


NUMPY_IMPL = {
    "truth_degrees": _np_truth_degrees,
    "truth_degrees_matrix": _np_truth_degrees_matrix,
    "ensemble_winner_idx": _np_ensemble_winner_idx,
    "match_tally": _np_match_tally,
    "best_split": _np_best_split,
}

LOOP_IMPL = {
    "truth_degrees": _py_truth_degrees,
    "truth_degrees_matrix": _py_truth_degrees_matrix,
    "ensemble_winner_idx": _py_ensemble_winner_idx,
    "match_tally": _py_match_tally,
    "best_split": _py_best_split,
}


# ---------------------------------------------------------------------------
# backend selection
# ---------------------------------------------------------------------------

def _read_flag():
    raw = os.environ.get("RULEDFS_NUMBA", "").strip().lower()
    if raw in ("0", "false", "off", "no"):
        return "numpy"
    if raw in ("1", "true", "on", "yes"):
        return "numba"
    return "auto"


HAS_NUMBA = False
USING_NUMBA = False
JIT_IMPL = None

_mode = _read_flag()
if _mode != "numpy":
    try:
        import numba

        HAS_NUMBA = True
    except ImportError:
        if _mode == "numba":
            raise ImportError(
                "RULEDFS_NUMBA=1 requires numba, which is not importable"
            )

if HAS_NUMBA and _mode != "numpy":
    _cond = numba.njit(_py_cond)
    JIT_IMPL = {
        "truth_degrees": numba.njit(_py_truth_degrees),
        "truth_degrees_matrix": numba.njit(_py_truth_degrees_matrix),
        "ensemble_winner_idx": numba.njit(_py_ensemble_winner_idx),
        "match_tally": numba.njit(_py_match_tally),
        "best_split": numba.njit(_py_best_split),
    }
    _active = JIT_IMPL
    USING_NUMBA = True
else:
    _active = NUMPY_IMPL

truth_degrees = _active["truth_degrees"]
truth_degrees_matrix = _active["truth_degrees_matrix"]
ensemble_winner_idx = _active["ensemble_winner_idx"]
match_tally = _active["match_tally"]
best_split = _active["best_split"]
