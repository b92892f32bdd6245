"""Crisp and fuzzy rule representation and evaluation.

A rule is a conjunction of per-feature conditions plus a consequent class,
carrying the class distribution (confidence vector) of the training samples
it covers and its coverage fraction (support). Rule bases come in two
structures: tree-partitioned (every full observation fires exactly one rule)
and flat (a declared default rule or the class prior backs the no-fire case).

Truth degrees follow the product t-norm; crisp conditions evaluate in {0, 1}
where min and product coincide. Conditions on unobserved features contribute
exactly 1, which makes a rule's degree monotone non-increasing as the
observation mask grows.

Evaluation is delegated to the kernels module; every rule base lazily caches
a packed array form of its rules (see ``pack``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import Dataset, PartialObservation, _frozen

_KIND_CODE = {"le": _kernels.K_LE, "gt": _kernels.K_GT, "fuzzy": _kernels.K_FUZZY}

DISTRIBUTION_TOL = 1e-9


def as_distribution(values) -> np.ndarray:
    """Validate and freeze a class-probability vector."""
    arr = np.asarray(values, np.float64)
    if arr.ndim != 1:
        raise ValueError("distribution must be a vector")
    if np.any(arr < 0):
        raise ValueError("distribution entries must be non-negative")
    if abs(float(arr.sum()) - 1.0) > DISTRIBUTION_TOL:
        raise ValueError(f"distribution sums to {arr.sum()!r}, expected 1")
    return _frozen(arr)


@dataclass(frozen=True)
class MembershipFunction:
    """Trapezoidal membership over (l, m1, m2, r); triangular when m1 == m2.

    Evaluates into [0, 1] with value 1 on [m1, m2]. Degenerate spans (shared
    endpoints) collapse the corresponding ramp to a step.
    """

    name: str
    l: float
    m1: float
    m2: float
    r: float

    def __post_init__(self):
        if not self.l <= self.m1 <= self.m2 <= self.r:
            raise ValueError(f"membership parameters must be non-decreasing: {self}")

    @classmethod
    def triangular(cls, name: str, l: float, m: float, r: float):
        return cls(name, l, m, m, r)

    def evaluate(self, x: float) -> float:
        return _kernels._py_cond(
            _kernels.K_FUZZY, float(x), self.l, self.m1, self.m2, self.r
        )


@dataclass(frozen=True)
class Condition:
    """One predicate on one feature.

    kind 'le' keeps value <= hi, 'gt' keeps value > lo, 'interval' keeps
    lo < value <= hi (or lo <= value <= hi when closed_lo, the hand-authored
    closed form), 'fuzzy' evaluates membership function mf_index of the
    owning rule base's partition row for this feature.
    """

    feature: int
    kind: str
    lo: float = -math.inf
    hi: float = math.inf
    closed_lo: bool = False
    mf_index: int = -1

    def __post_init__(self):
        if self.kind not in ("le", "gt", "interval", "fuzzy"):
            raise ValueError(f"unknown condition kind {self.kind!r}")
        if self.kind == "interval" and not self.lo <= self.hi:
            raise ValueError("interval needs lo <= hi")
        if self.kind == "fuzzy" and self.mf_index < 0:
            raise ValueError("fuzzy condition needs a membership function index")

    def _packed(self, partition) -> tuple[int, float, float, float, float]:
        if self.kind == "fuzzy":
            mf = partition[self.feature][self.mf_index]
            return _kernels.K_FUZZY, mf.l, mf.m1, mf.m2, mf.r
        if self.kind == "interval":
            code = _kernels.K_CLOSED_INTERVAL if self.closed_lo else _kernels.K_OPEN_INTERVAL
            return code, self.lo, self.hi, 0.0, 0.0
        return _KIND_CODE[self.kind], self.lo, self.hi, 0.0, 0.0

    def evaluate(self, value: float, partition=None) -> float:
        code, a, b, c, d = self._packed(partition)
        return _kernels._py_cond(code, float(value), a, b, c, d)

    def text(self, feature_names, partition=None) -> str:
        name = feature_names[self.feature]
        if self.kind == "le":
            return f"{name} <= {self.hi:.6g}"
        if self.kind == "gt":
            return f"{name} > {self.lo:.6g}"
        if self.kind == "fuzzy":
            return f"{name} is {partition[self.feature][self.mf_index].name}"
        left = "[" if self.closed_lo else "("
        return f"{name} in {left}{self.lo:.6g}, {self.hi:.6g}]"


@dataclass(frozen=True, eq=False)
class Rule:
    """Condition conjunction -> consequent class with confidence and support."""

    conditions: tuple[Condition, ...]
    consequent: int
    confidence: np.ndarray
    support: float
    prior_fallback: bool = False

    def __post_init__(self):
        object.__setattr__(self, "conditions", tuple(self.conditions))
        object.__setattr__(self, "confidence", as_distribution(self.confidence))
        feats = [c.feature for c in self.conditions]
        if len(feats) != len(set(feats)):
            raise ValueError("at most one condition per feature")
        if self.consequent != int(np.argmax(self.confidence)):
            raise ValueError("consequent must be the argmax of the confidence vector")
        if not 0.0 <= self.support <= 1.0:
            raise ValueError("support must lie in [0, 1]")

    def features(self) -> tuple[int, ...]:
        return tuple(c.feature for c in self.conditions)


@dataclass(frozen=True, eq=False)
class RuleBase:
    """An ordered rule list with shared metadata.

    logic is 'crisp' or 'fuzzy'; structure is 'tree' (partitioning, from
    flattened decision trees) or 'flat'. Fuzzy bases carry the per-feature
    membership partition their conditions reference. The optional default
    rule backs the no-fire case of flat bases and never takes part in
    epistemic sums or the active-feature set.
    """

    rules: tuple[Rule, ...]
    logic: str
    structure: str
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]
    class_priors: np.ndarray
    partition: tuple[tuple[MembershipFunction, ...], ...] | None = None
    default_rule: Rule | None = None

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "class_priors", as_distribution(self.class_priors))
        if self.logic not in ("crisp", "fuzzy"):
            raise ValueError(f"unknown logic {self.logic!r}")
        if self.structure not in ("flat", "tree"):
            raise ValueError(f"unknown structure {self.structure!r}")
        if self.logic == "fuzzy" and self.partition is None:
            raise ValueError("fuzzy rule base needs a membership partition")
        for r in self.rules:
            for c in r.conditions:
                if c.kind == "fuzzy":
                    if self.partition is None or c.mf_index >= len(
                        self.partition[c.feature]
                    ):
                        raise ValueError(
                            "fuzzy condition references a missing membership function"
                        )

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_rules(self) -> int:
        return len(self.rules)


class RulePack:
    """Kernel-ready parallel arrays for one rule base (see _kernels)."""

    __slots__ = ("ptr", "feat", "kind", "p0", "p1", "p2", "p3", "conf", "consequent")

    def __init__(self, rb: RuleBase):
        conds = [c for r in rb.rules for c in r.conditions]
        self.ptr = np.zeros(len(rb.rules) + 1, np.int64)
        np.cumsum([len(r.conditions) for r in rb.rules], out=self.ptr[1:])
        self.feat = np.array([c.feature for c in conds], np.int64)
        self.kind = np.empty(len(conds), np.int64)
        self.p0 = np.empty(len(conds), np.float64)
        self.p1 = np.empty(len(conds), np.float64)
        self.p2 = np.empty(len(conds), np.float64)
        self.p3 = np.empty(len(conds), np.float64)
        for i, c in enumerate(conds):
            code, a, b, cc, dd = c._packed(rb.partition)
            self.kind[i] = code
            self.p0[i] = a
            self.p1[i] = b
            self.p2[i] = cc
            self.p3[i] = dd
        self.conf = np.array([r.confidence for r in rb.rules], np.float64)
        self.conf = self.conf.reshape(len(rb.rules), rb.n_classes)
        self.consequent = np.array([r.consequent for r in rb.rules], np.int64)


def pack(rb: RuleBase) -> RulePack:
    cached = getattr(rb, "_pack_cache", None)
    if cached is None:
        cached = RulePack(rb)
        object.__setattr__(rb, "_pack_cache", cached)
    return cached


def truth_degree(rule: Rule, obs: PartialObservation, partition=None) -> float:
    """Product over the rule's conditions; unobserved features contribute 1."""
    d = 1.0
    for c in rule.conditions:
        if not obs.observed[c.feature]:
            continue
        d *= c.evaluate(obs.values[c.feature], partition)
        if d == 0.0:
            return 0.0
    return d


def truth_degrees(rb: RuleBase, obs: PartialObservation) -> np.ndarray:
    """Degrees of every rule in the base under obs, in rule order."""
    p = pack(rb)
    return _kernels.truth_degrees(
        obs.values, obs.observed, p.ptr, p.feat, p.kind, p.p0, p.p1, p.p2, p.p3
    )


def winner_rule(rb: RuleBase, obs: PartialObservation) -> tuple[int, float]:
    """Index and degree of the maximal-degree rule; ties keep the lowest
    index; (-1, 0.0) signals that nothing fired."""
    if not rb.rules:
        raise ValueError("rule base is empty")
    deg = truth_degrees(rb, obs)
    j = int(np.argmax(deg))
    if deg[j] <= 0.0:
        return -1, 0.0
    return j, float(deg[j])


def predict(rb: RuleBase, obs: PartialObservation) -> np.ndarray:
    """Confidence vector of the winner rule; the declared default rule or the
    training class prior covers the no-fire case."""
    j, _ = winner_rule(rb, obs)
    if j >= 0:
        return rb.rules[j].confidence
    if rb.default_rule is not None:
        return rb.default_rule.confidence
    return rb.class_priors


def memberships(rb: RuleBase, samples: np.ndarray) -> np.ndarray:
    """(n_samples, n_rules) truth degrees under full observation."""
    p = pack(rb)
    return _kernels.truth_degrees_matrix(
        np.ascontiguousarray(samples, np.float64),
        p.ptr, p.feat, p.kind, p.p0, p.p1, p.p2, p.p3,
    )


def rule_support_confidence(
    rule: Rule, ds: Dataset, partition=None
) -> tuple[float, np.ndarray, bool]:
    """Support and class confidence of one rule over a dataset.

    Crisp rules count covered samples; fuzzy rules weight by membership:
    support = sum(mu) / N and confidence_c = sum(mu * [y = c]) / sum(mu).
    Zero total membership flags the rule and substitutes the class prior.
    """
    mu = _rule_memberships(rule, ds, partition)
    total = float(mu.sum())
    support = total / ds.n_samples
    if total == 0.0:
        return 0.0, ds.class_priors(), True
    conf = np.zeros(ds.n_classes, np.float64)
    np.add.at(conf, ds.labels, mu)
    return support, conf / total, False


def _rule_memberships(rule: Rule, ds: Dataset, partition=None) -> np.ndarray:
    holder = RuleBase(
        rules=(rule,),
        logic="fuzzy" if any(c.kind == "fuzzy" for c in rule.conditions) else "crisp",
        structure="flat",
        feature_names=ds.feature_names,
        class_names=ds.class_names,
        class_priors=ds.class_priors(),
        partition=partition,
    )
    return memberships(holder, ds.samples)[:, 0]


def render_rule(rule: Rule, rb: RuleBase) -> str:
    if rule.conditions:
        body = " AND ".join(c.text(rb.feature_names, rb.partition) for c in rule.conditions)
    else:
        body = "TRUE"
    cls = rb.class_names[rule.consequent]
    conf = float(rule.confidence[rule.consequent])
    note = ", prior fallback" if rule.prior_fallback else ""
    return f"IF {body} THEN {cls} [conf {conf:.2f}, supp {rule.support:.2f}{note}]"


def render_rule_base(rb: RuleBase) -> str:
    lines = [f"# {rb.logic} {rb.structure} rule base: {rb.n_rules} rules"]
    for i, r in enumerate(rb.rules):
        lines.append(f"{i:3d}: {render_rule(r, rb)}")
    if rb.default_rule is not None:
        lines.append(f"default: {render_rule(rb.default_rule, rb)}")
    return "\n".join(lines)


def stack_packs(bases: list[RuleBase]) -> dict:
    """Concatenate several packs for one-call ensemble evaluation.

    Returns arrays keyed like the kernel signature plus model_ptr delimiting
    each base's rule range and a fallback confidence row per base.
    """
    packs = [pack(rb) for rb in bases]
    model_ptr = np.zeros(len(bases) + 1, np.int64)
    np.cumsum([p.ptr.shape[0] - 1 for p in packs], out=model_ptr[1:])
    ptr = np.zeros(int(model_ptr[-1]) + 1, np.int64)
    off = 0
    cursor = 1
    for p in packs:
        n_r = p.ptr.shape[0] - 1
        ptr[cursor : cursor + n_r] = off + p.ptr[1:]
        off += p.ptr[-1]
        cursor += n_r
    fallback = np.empty((len(bases), bases[0].n_classes), np.float64)
    for m, rb in enumerate(bases):
        src = rb.default_rule.confidence if rb.default_rule is not None else rb.class_priors
        fallback[m] = src
    return {
        "model_ptr": model_ptr,
        "ptr": ptr,
        "feat": np.concatenate([p.feat for p in packs]),
        "kind": np.concatenate([p.kind for p in packs]),
        "p0": np.concatenate([p.p0 for p in packs]),
        "p1": np.concatenate([p.p1 for p in packs]),
        "p2": np.concatenate([p.p2 for p in packs]),
        "p3": np.concatenate([p.p3 for p in packs]),
        "conf": np.concatenate([p.conf for p in packs], axis=0),
        "consequent": np.concatenate([p.consequent for p in packs]),
        "fallback": fallback,
    }
