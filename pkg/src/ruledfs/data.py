"""Dataset ingestion, discretization, imputation statistics, and the
empirical conditional distributions that drive the oracle value function.

CSV contract: comma separated, UTF-8, '.' decimal, one header row. A cell
that is empty or '?' marks a missing value; rows containing one are rejected
with a warning naming every location. Any other non-float token appearing in
a column that also holds numeric values is a hard error. Columns whose cells
never parse as floats are treated as categoricals and integer-encoded in
first-appearance order.

All types here are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

_MISSING = ("", "?")


class DataError(ValueError):
    """Raised for malformed input data; the CLI maps it to exit code 2."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """A fully observed training table: N samples, M features, C classes."""

    feature_names: tuple[str, ...]
    samples: np.ndarray            # (N, M) float64
    labels: np.ndarray             # (N,) int64 in [0, C)
    class_names: tuple[str, ...]
    categorical: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        samples = _frozen(np.asarray(self.samples, np.float64))
        labels = _frozen(np.asarray(self.labels, np.int64))
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)
        if not self.categorical:
            object.__setattr__(self, "categorical", (False,) * samples.shape[1])
        n, m = samples.shape
        if n < 1 or m < 1:
            raise DataError("dataset needs at least one sample and one feature")
        if len(self.feature_names) != m or len(self.categorical) != m:
            raise DataError("feature metadata length does not match sample width")
        if labels.shape != (n,):
            raise DataError("label count does not match sample count")
        if len(self.class_names) < 2:
            raise DataError("need at least 2 classes")
        if labels.min() < 0 or labels.max() >= len(self.class_names):
            raise DataError("label index outside [0, C)")
        if not np.all(np.isfinite(samples)):
            raise DataError("samples must be finite")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def n_features(self) -> int:
        return self.samples.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_priors(self) -> np.ndarray:
        counts = np.bincount(self.labels, minlength=self.n_classes)
        return counts / self.n_samples

    def subset(self, indices: np.ndarray) -> "Dataset":
        """Row subset sharing feature and class metadata (splits, bootstraps)."""
        return Dataset(
            feature_names=self.feature_names,
            samples=self.samples[indices],
            labels=self.labels[indices],
            class_names=self.class_names,
            categorical=self.categorical,
        )


@dataclass(frozen=True, eq=False)
class PartialObservation:
    """A sample with a per-feature observed mask; unobserved values are NaN
    and must never be read without explicit imputation."""

    values: np.ndarray   # (M,) float64
    observed: np.ndarray  # (M,) bool

    def __post_init__(self):
        observed = _frozen(np.asarray(self.observed, bool))
        values = np.asarray(self.values, np.float64).copy()
        if values.shape != observed.shape or values.ndim != 1:
            raise ValueError("values and observed must be equal-length vectors")
        if not np.all(np.isfinite(values[observed])):
            raise ValueError("observed values must be finite")
        values[~observed] = np.nan
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "observed", observed)

    @classmethod
    def empty(cls, n_features: int) -> "PartialObservation":
        return cls(np.full(n_features, np.nan), np.zeros(n_features, bool))

    @classmethod
    def full(cls, values: np.ndarray) -> "PartialObservation":
        values = np.asarray(values, np.float64)
        return cls(values, np.ones(values.shape[0], bool))

    def with_feature(self, i: int, value: float) -> "PartialObservation":
        if self.observed[i]:
            raise ValueError(f"feature {i} is already observed")
        values = self.values.copy()
        observed = self.observed.copy()
        values[i] = value
        observed[i] = True
        return PartialObservation(values, observed)

    @property
    def n_observed(self) -> int:
        return int(self.observed.sum())


@dataclass(frozen=True, eq=False)
class DiscretizationScheme:
    """Per-feature quantile bin edges.

    Feature i has len(edges[i]) + 1 bins; bin b covers (edge_{b-1}, edge_b],
    so every real value maps to exactly one bin. representatives[i][b] is the
    mean of the training values that fell into bin b, with an in-bin fallback
    (edge or midpoint) for bins no training value reached.
    """

    edges: tuple[np.ndarray, ...]
    representatives: tuple[np.ndarray, ...]
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(_frozen(e) for e in self.edges))
        object.__setattr__(
            self, "representatives", tuple(_frozen(r) for r in self.representatives)
        )
        for i, e in enumerate(self.edges):
            if e.size and not np.all(np.diff(e) > 0):
                raise ValueError(f"bin edges for feature {i} must strictly increase")
            if self.representatives[i].shape[0] != e.size + 1:
                raise ValueError(f"feature {i} needs one representative per bin")

    @property
    def n_features(self) -> int:
        return len(self.edges)

    def n_bins(self, i: int) -> int:
        return self.edges[i].size + 1

    def assign(self, i: int, value: float) -> int:
        # bin b = number of edges strictly below value, so bins are
        # right-closed: bin b covers (edge_{b-1}, edge_b]
        return int(np.searchsorted(self.edges[i], value, side="left"))

    def assign_all(self, samples: np.ndarray) -> np.ndarray:
        out = np.empty(samples.shape, np.int64)
        for i in range(samples.shape[1]):
            out[:, i] = np.searchsorted(self.edges[i], samples[:, i], side="left")
        return out


def fit_discretization(ds: Dataset, bins: int = 5) -> DiscretizationScheme:
    """Quantile discretization: interior edges at k/bins quantiles.

    Duplicate quantile edges collapse, so a feature may end up with fewer
    bins; a constant feature collapses to a single bin and is flagged in the
    scheme's notes.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    qs = np.array([k / bins for k in range(1, bins)])
    edges: list[np.ndarray] = []
    reps: list[np.ndarray] = []
    notes: list[str] = []
    for i in range(ds.n_features):
        col = ds.samples[:, i]
        if col.min() == col.max():
            e = np.array([], np.float64)
            notes.append(f"feature {i} ({ds.feature_names[i]}): constant, single bin")
        else:
            e = np.unique(np.quantile(col, qs))
        assigned = np.searchsorted(e, col, side="left")
        rep = np.empty(e.size + 1, np.float64)
        for b in range(e.size + 1):
            inside = col[assigned == b]
            if inside.size:
                rep[b] = inside.mean()
            elif b == 0:
                rep[b] = e[0]
            elif b < e.size:
                rep[b] = (e[b - 1] + e[b]) / 2.0
            else:
                width = e[-1] - e[-2] if e.size >= 2 else 1.0
                rep[b] = e[-1] + width / 2.0
        edges.append(e)
        reps.append(rep)
    return DiscretizationScheme(tuple(edges), tuple(reps), tuple(notes))


@dataclass(frozen=True, eq=False)
class EmpiricalConditional:
    """Empirical p(feature bin | observed bins) over the training table with
    Laplace smoothing; exact-match conditioning with a smoothed-marginal
    fallback when no training row matches."""

    scheme: DiscretizationScheme
    train_bins: np.ndarray  # (N, M) int64
    alpha: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "train_bins", _frozen(np.asarray(self.train_bins, np.int64)))
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @classmethod
    def fit(cls, ds: Dataset, scheme: DiscretizationScheme, alpha: float = 1.0):
        return cls(scheme, scheme.assign_all(ds.samples), alpha)


def conditional_distribution(
    ec: EmpiricalConditional, obs: PartialObservation, i: int
) -> np.ndarray:
    """Distribution over the bins of feature i given obs's observed bins.

    Counts training rows whose bins match every observed feature exactly,
    tallies their feature-i bins, adds alpha everywhere, and normalizes.
    Zero matching rows fall back to the smoothed marginal of feature i.
    """
    if obs.observed[i]:
        raise ValueError(f"feature {i} is already observed")
    obs_cols = np.flatnonzero(obs.observed)
    obs_vals = np.empty(obs_cols.size, np.int64)
    for j, col in enumerate(obs_cols):
        obs_vals[j] = ec.scheme.assign(int(col), float(obs.values[col]))
    n_bins = ec.scheme.n_bins(i)
    counts, n_match = _kernels.match_tally(ec.train_bins, obs_cols, obs_vals, i, n_bins)
    if n_match == 0 and obs_cols.size:
        counts, _ = _kernels.match_tally(
            ec.train_bins, np.empty(0, np.int64), np.empty(0, np.int64), i, n_bins
        )
    smoothed = counts + ec.alpha
    return smoothed / smoothed.sum()


def training_means(ds: Dataset) -> np.ndarray:
    """Arithmetic mean of every feature column."""
    return ds.samples.mean(axis=0)


def imputation_values(ds: Dataset) -> np.ndarray:
    """Mean per numeric feature; mode (lowest value on ties) per categorical."""
    out = training_means(ds)
    for i, is_cat in enumerate(ds.categorical):
        if is_cat:
            vals, counts = np.unique(ds.samples[:, i], return_counts=True)
            out[i] = vals[np.argmax(counts)]
    return out


def stratified_split(
    ds: Dataset, test_fraction: float = 0.2, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic stratified train/test indices.

    Per class, a seeded permutation sets aside round(fraction * count) rows
    (at least 1 when the class has 2+ rows) for the test side.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train: list[np.ndarray] = []
    test: list[np.ndarray] = []
    for c in range(ds.n_classes):
        idx = np.flatnonzero(ds.labels == c)
        perm = idx[rng.permutation(idx.size)]
        n_test = int(round(test_fraction * idx.size))
        if idx.size >= 2:
            n_test = min(max(n_test, 1), idx.size - 1)
        else:
            n_test = 0
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def load_csv(path: str, label_column: str) -> Dataset:
    """Load a CSV into a Dataset; the header names columns, label last or not.

    Rows with missing cells ('' or '?') are rejected with one warning listing
    every rejected location. Mixed numeric/non-numeric columns raise
    DataError at the first offending cell.
    """
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"file not found: {path}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {len(rows) + 2} has {len(row)} cells, expected {len(header)}"
                )
            rows.append([c.strip() for c in row])
    if label_column not in header:
        raise DataError(
            f"{path}: no column named {label_column!r}; available: {', '.join(header)}"
        )
    if not rows:
        raise DataError(f"{path}: no data rows")

    label_idx = header.index(label_column)
    feature_names = tuple(h for j, h in enumerate(header) if j != label_idx)

    # reject rows with missing cells, reporting 1-based file line numbers
    missing: list[str] = []
    kept: list[list[str]] = []
    for r, row in enumerate(rows):
        bad = [header[j] for j, c in enumerate(row) if c in _MISSING]
        if bad:
            missing.append(f"line {r + 2} ({', '.join(bad)})")
        else:
            kept.append(row)
    if missing:
        warnings.warn(
            f"{path}: rejected {len(missing)} row(s) with missing cells: "
            + "; ".join(missing),
            stacklevel=2,
        )
    if not kept:
        raise DataError(f"{path}: every row has missing cells")

    n = len(kept)
    m = len(feature_names)
    samples = np.empty((n, m), np.float64)
    categorical = []
    col_j = 0
    for j in range(len(header)):
        if j == label_idx:
            continue
        cells = [row[j] for row in kept]
        parsed = []
        first_bad = None
        for r, c in enumerate(cells):
            try:
                parsed.append(float(c))
            except ValueError:
                first_bad = (r, c)
                break
        if first_bad is None:
            samples[:, col_j] = parsed
            categorical.append(False)
        else:
            # any numeric cell elsewhere in the column makes this a data error
            numeric_elsewhere = None
            for r, c in enumerate(cells):
                try:
                    float(c)
                    numeric_elsewhere = r
                    break
                except ValueError:
                    pass
            if numeric_elsewhere is not None:
                r, c = first_bad
                raise DataError(
                    f"{path}: non-numeric cell {c!r} in numeric column "
                    f"{header[j]!r} (data row {r + 1})"
                )
            codes: dict[str, int] = {}
            for r, c in enumerate(cells):
                if c not in codes:
                    codes[c] = len(codes)
                samples[r, col_j] = codes[c]
            categorical.append(True)
        col_j += 1

    class_codes: dict[str, int] = {}
    labels = np.empty(n, np.int64)
    for r, row in enumerate(kept):
        name = row[label_idx]
        if name not in class_codes:
            class_codes[name] = len(class_codes)
        labels[r] = class_codes[name]
    if len(class_codes) < 2:
        raise DataError(f"{path}: need at least 2 classes, found {len(class_codes)}")

    return Dataset(
        feature_names=feature_names,
        samples=samples,
        labels=labels,
        class_names=tuple(class_codes),
        categorical=tuple(categorical),
    )
