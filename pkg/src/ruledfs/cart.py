"""CART training, tree flattening into rule bases, mean-imputed prediction,
and bootstrap ensembles for epistemic uncertainty.

Trees grow by exhaustive Gini split search (midpoints of adjacent distinct
sorted values; ties keep the lowest feature index, then the lowest
threshold). Each root-to-leaf path flattens into one rule; conditions on the
same feature merge into a single threshold or interval, so every rule keeps
at most one condition per feature and the flattened base partitions feature
space exactly like tree traversal.

Partial observations are predicted by filling unobserved entries with the
training imputation vector (column means; mode for integer-encoded
categoricals) and running the full-observation path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Dataset, PartialObservation, imputation_values
from .rules import Condition, Rule, RuleBase, predict, stack_packs


@dataclass(frozen=True)
class CartConfig:
    max_depth: int = 8
    min_samples_leaf: int = 5
    bootstrap_count: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.bootstrap_count < 2:
            raise ValueError("bootstrap_count must be >= 2")


@dataclass(frozen=True, eq=False)
class CartEnsemble:
    """Primary tree rule base plus bootstrap auxiliaries sharing feature
    indexing, class count, and the imputation vector."""

    primary: RuleBase
    auxiliaries: tuple[RuleBase, ...]
    imputation: np.ndarray
    config: CartConfig

    def __post_init__(self):
        object.__setattr__(self, "auxiliaries", tuple(self.auxiliaries))
        for rb in self.auxiliaries:
            if rb.n_features != self.primary.n_features:
                raise ValueError("ensemble members disagree on feature count")
            if rb.n_classes != self.primary.n_classes:
                raise ValueError("ensemble members disagree on class count")

    @property
    def members(self) -> tuple[RuleBase, ...]:
        return (self.primary,) + self.auxiliaries

    def _stacked(self) -> dict:
        cached = getattr(self, "_stacked_cache", None)
        if cached is None:
            cached = stack_packs(list(self.members))
            object.__setattr__(self, "_stacked_cache", cached)
        return cached

    def fill(self, obs: PartialObservation) -> np.ndarray:
        """Mean/mode-imputed completion of obs."""
        return np.where(obs.observed, obs.values, self.imputation)

    def member_confidences(self, obs: PartialObservation) -> np.ndarray:
        """Winner confidence vector of every member on the imputed completion
        of obs; row 0 is the primary. One kernel call over stacked rules."""
        filled = self.fill(obs)
        s = self._stacked()
        winners = _kernels.ensemble_winner_idx(
            filled, np.ones(filled.shape[0], bool),
            s["model_ptr"], s["ptr"], s["feat"], s["kind"],
            s["p0"], s["p1"], s["p2"], s["p3"],
        )
        out = np.empty((len(self.members), self.primary.n_classes), np.float64)
        for m, w in enumerate(winners):
            out[m] = s["conf"][w] if w >= 0 else s["fallback"][m]
        return out


def fit_cart(ds: Dataset, cfg: CartConfig) -> RuleBase:
    """Grow one tree on the full dataset and flatten it to a rule base.

    Leaves become rules in depth-first (left-before-right) order; leaf class
    frequencies become the confidence vector, the leaf's sample fraction its
    support. Degenerate data (pure node at the root, or nothing splittable)
    yields a single empty-antecedent prior rule.
    """
    X = np.ascontiguousarray(ds.samples, np.float64)
    y = ds.labels
    n, m = X.shape
    rules: list[Rule] = []

    def grow(idx: np.ndarray, depth: int, path: list[tuple[int, str, float]]):
        sub_x = np.ascontiguousarray(X[idx])
        sub_y = np.ascontiguousarray(y[idx])
        feat = -1
        if depth < cfg.max_depth:
            feat, thr, _, _ = _kernels.best_split(
                sub_x, sub_y, ds.n_classes, cfg.min_samples_leaf
            )
            feat = int(feat)
        if feat < 0:
            counts = np.bincount(sub_y, minlength=ds.n_classes)
            rules.append(
                Rule(
                    conditions=_merge_path(path),
                    consequent=int(np.argmax(counts)),
                    confidence=counts / idx.size,
                    support=idx.size / n,
                )
            )
            return
        thr = float(thr)
        left = idx[X[idx, feat] <= thr]
        right = idx[X[idx, feat] > thr]
        grow(left, depth + 1, path + [(feat, "le", thr)])
        grow(right, depth + 1, path + [(feat, "gt", thr)])

    grow(np.arange(n), 0, [])
    return RuleBase(
        rules=tuple(rules),
        logic="crisp",
        structure="tree",
        feature_names=ds.feature_names,
        class_names=ds.class_names,
        class_priors=ds.class_priors(),
    )


def _merge_path(path: list[tuple[int, str, float]]) -> tuple[Condition, ...]:
    # one condition per feature: tightest upper bound from 'le' edges,
    # tightest lower bound from 'gt' edges, both -> half-open interval
    order: list[int] = []
    lo: dict[int, float] = {}
    hi: dict[int, float] = {}
    for feature, side, thr in path:
        if feature not in lo:
            order.append(feature)
            lo[feature] = -math.inf
            hi[feature] = math.inf
        if side == "le":
            hi[feature] = min(hi[feature], thr)
        else:
            lo[feature] = max(lo[feature], thr)
    conds = []
    for f in order:
        if lo[f] == -math.inf:
            conds.append(Condition(feature=f, kind="le", hi=hi[f]))
        elif hi[f] == math.inf:
            conds.append(Condition(feature=f, kind="gt", lo=lo[f]))
        else:
            conds.append(Condition(feature=f, kind="interval", lo=lo[f], hi=hi[f]))
    return tuple(conds)


def fit_ensemble(ds: Dataset, cfg: CartConfig) -> CartEnsemble:
    """Primary model on the full data plus bootstrap_count auxiliaries, each
    on an N-row seeded resample. All resample index sets are drawn up front
    from one seeded generator, so member fits are order-independent."""
    rng = np.random.default_rng(cfg.seed)
    resamples = [
        rng.integers(0, ds.n_samples, ds.n_samples)
        for _ in range(cfg.bootstrap_count)
    ]
    primary = fit_cart(ds, cfg)
    auxiliaries = tuple(fit_cart(ds.subset(np.sort(idx)), cfg) for idx in resamples)
    return CartEnsemble(
        primary=primary,
        auxiliaries=auxiliaries,
        imputation=imputation_values(ds),
        config=cfg,
    )


def predict_imputed(
    ensemble: CartEnsemble, obs: PartialObservation, which: str | int = "primary"
) -> np.ndarray:
    """Winner confidence of one member on the imputed completion of obs.

    which selects the primary ('primary') or an auxiliary by index. A fully
    observed sample is returned unchanged by the fill, so the result then
    matches direct prediction bit for bit.
    """
    base = ensemble.primary if which == "primary" else ensemble.auxiliaries[which]
    return predict(base, PartialObservation.full(ensemble.fill(obs)))
