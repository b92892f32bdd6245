"""Fuzzy rule base construction: linguistic partitions plus a genetic
algorithm that selects compact rule sets by Matthews-correlation fitness.

Partitions are three triangular membership functions per feature anchored at
the 0/25/50/75/100 data percentiles: low = (q0, q0, q50), medium =
(q25, q50, q75), high = (q50, q100, q100). Every observed value then has
positive membership in at least one set and each function peaks at 1.

The GA genome is a list of rules; each rule is a set of (feature,
linguistic-label) pairs plus a consequent class. Evolution is elitist and
generational with tournament selection (size 3), one-point crossover on rule
lists, and single-edit mutation, all driven by one seeded generator so runs
are reproducible. Fitness is the multiclass MCC of winner-takes-all
predictions on a held-out quarter of the training data; the returned base
has confidences and supports recomputed on the full training set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Dataset, stratified_split
from .rules import (
    Condition,
    MembershipFunction,
    Rule,
    RuleBase,
    rule_support_confidence,
)

# genome rule: (((feature, mf_index), ...), consequent)
Genome = tuple[tuple[tuple[tuple[int, int], ...], int], ...]

_LABELS = ("low", "medium", "high")


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 30
    generations: int = 50
    max_rules: int = 15
    max_conditions_per_rule: int = 3
    mutation_rate: float = 0.1
    crossover_rate: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if min(self.population_size, self.max_rules, self.max_conditions_per_rule) < 1:
            raise ValueError("population_size, max_rules, max_conditions_per_rule must be >= 1")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for rate in (self.mutation_rate, self.crossover_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError("rates must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class FuzzyPartition:
    """Per-feature tuple of membership functions, shared by every rule."""

    functions: tuple[tuple[MembershipFunction, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(tuple(f) for f in self.functions))
        if any(len(f) == 0 for f in self.functions):
            raise ValueError("every feature needs at least one membership function")

    @property
    def n_features(self) -> int:
        return len(self.functions)


def fit_partition(ds: Dataset) -> FuzzyPartition:
    """Quantile-anchored low/medium/high triangles per feature."""
    per_feature = []
    for i in range(ds.n_features):
        col = ds.samples[:, i]
        q0, q25, q50, q75, q100 = (float(np.quantile(col, q)) for q in (0, 0.25, 0.5, 0.75, 1))
        per_feature.append((
            MembershipFunction.triangular(_LABELS[0], q0, q0, q50),
            MembershipFunction.triangular(_LABELS[1], q25, q50, q75),
            MembershipFunction.triangular(_LABELS[2], q50, q100, q100),
        ))
    return FuzzyPartition(tuple(per_feature))


def mcc(predictions, labels) -> float:
    """Multiclass Matthews correlation via the confusion-matrix
    generalization; 0 when the denominator vanishes."""
    pred = np.asarray(predictions, np.int64)
    true = np.asarray(labels, np.int64)
    if pred.shape != true.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("predictions and labels must be equal-length non-empty vectors")
    n_classes = int(max(pred.max(), true.max())) + 1
    s = float(pred.size)
    correct = float(np.sum(pred == true))
    p_counts = np.bincount(pred, minlength=n_classes).astype(np.float64)
    t_counts = np.bincount(true, minlength=n_classes).astype(np.float64)
    num = correct * s - float(p_counts @ t_counts)
    den_p = s * s - float(p_counts @ p_counts)
    den_t = s * s - float(t_counts @ t_counts)
    if den_p <= 0.0 or den_t <= 0.0:
        return 0.0
    return num / float(np.sqrt(den_p * den_t))


# ---------------------------------------------------------------------------
# genome evaluation
# ---------------------------------------------------------------------------

def _genome_arrays(genome: Genome, partition: FuzzyPartition):
    n_conds = sum(len(conds) for conds, _ in genome)
    ptr = np.zeros(len(genome) + 1, np.int64)
    np.cumsum([len(conds) for conds, _ in genome], out=ptr[1:])
    feat = np.empty(n_conds, np.int64)
    p0 = np.empty(n_conds, np.float64)
    p1 = np.empty(n_conds, np.float64)
    p2 = np.empty(n_conds, np.float64)
    p3 = np.empty(n_conds, np.float64)
    k = 0
    for conds, _ in genome:
        for f, mf_i in conds:
            mf = partition.functions[f][mf_i]
            feat[k] = f
            p0[k], p1[k], p2[k], p3[k] = mf.l, mf.m1, mf.m2, mf.r
            k += 1
    kind = np.full(n_conds, _kernels.K_FUZZY, np.int64)
    consequents = np.array([c for _, c in genome], np.int64)
    return ptr, feat, kind, p0, p1, p2, p3, consequents


def _genome_predictions(
    genome: Genome, partition: FuzzyPartition, X: np.ndarray, fallback_class: int
) -> np.ndarray:
    ptr, feat, kind, p0, p1, p2, p3, consequents = _genome_arrays(genome, partition)
    deg = _kernels.truth_degrees_matrix(X, ptr, feat, kind, p0, p1, p2, p3)
    winners = np.argmax(deg, axis=1)
    fired = deg[np.arange(deg.shape[0]), winners] > 0.0
    return np.where(fired, consequents[winners], fallback_class)


def _fitness(
    genome: Genome, partition: FuzzyPartition, X_val, y_val, fallback_class: int
) -> float:
    pred = _genome_predictions(genome, partition, X_val, fallback_class)
    return mcc(pred, y_val)


# ---------------------------------------------------------------------------
# genome construction, repair, variation
# ---------------------------------------------------------------------------

def _repair_rule(conds, consequent, cfg: GaConfig) -> tuple[tuple[tuple[int, int], ...], int]:
    # one condition per feature (first wins), capped length, sorted by feature
    seen: dict[int, int] = {}
    for f, mf_i in conds:
        if f not in seen:
            seen[f] = mf_i
    trimmed = sorted(seen.items())[: cfg.max_conditions_per_rule]
    return tuple(trimmed), consequent


def _repair(genome, cfg: GaConfig, filler) -> Genome:
    rules = [_repair_rule(conds, cons, cfg) for conds, cons in genome]
    rules = rules[: cfg.max_rules]
    if not rules:
        rules = [filler()]
    return tuple(rules)


class _Breeder:
    """All random draws for the GA flow through one seeded generator."""

    def __init__(self, ds: Dataset, partition: FuzzyPartition, cfg: GaConfig, rng):
        self.ds = ds
        self.partition = partition
        self.cfg = cfg
        self.rng = rng

    def seeded_rule(self):
        # anchor a rule on a random training sample: strongest label per
        # drawn feature, the sample's class as consequent
        row = int(self.rng.integers(0, self.ds.n_samples))
        k = int(self.rng.integers(1, self.cfg.max_conditions_per_rule + 1))
        k = min(k, self.ds.n_features)
        feats = self.rng.choice(self.ds.n_features, size=k, replace=False)
        conds = []
        for f in sorted(int(f) for f in feats):
            value = float(self.ds.samples[row, f])
            mfs = self.partition.functions[f]
            strengths = [mf.evaluate(value) for mf in mfs]
            conds.append((f, int(np.argmax(strengths))))
        return tuple(conds), int(self.ds.labels[row])

    def uniform_rule(self):
        k = int(self.rng.integers(1, self.cfg.max_conditions_per_rule + 1))
        k = min(k, self.ds.n_features)
        feats = self.rng.choice(self.ds.n_features, size=k, replace=False)
        conds = tuple(
            (f, int(self.rng.integers(0, len(self.partition.functions[f]))))
            for f in sorted(int(f) for f in feats)
        )
        return conds, int(self.rng.integers(0, self.ds.n_classes))

    def individual(self, seeded: bool) -> Genome:
        n_rules = int(self.rng.integers(1, self.cfg.max_rules + 1))
        maker = self.seeded_rule if seeded else self.uniform_rule
        return _repair([maker() for _ in range(n_rules)], self.cfg, self.seeded_rule)

    def crossover(self, a: Genome, b: Genome) -> Genome:
        ca = int(self.rng.integers(0, len(a) + 1))
        cb = int(self.rng.integers(0, len(b) + 1))
        return _repair(a[:ca] + b[cb:], self.cfg, self.seeded_rule)

    def mutate(self, genome: Genome) -> Genome:
        rules = [(list(conds), cons) for conds, cons in genome]
        op = int(self.rng.integers(0, 4))
        if op == 0 and len(rules) >= self.cfg.max_rules:
            op = 1
        if op == 1 and len(rules) <= 1:
            op = 0
        if op == 0:
            rules.append((list(self.seeded_rule()[0]), self.seeded_rule()[1]))
        elif op == 1:
            rules.pop(int(self.rng.integers(0, len(rules))))
        elif op == 2:
            ri = int(self.rng.integers(0, len(rules)))
            conds, cons = rules[ri]
            grow = self.rng.random() < 0.5
            if grow and len(conds) < min(self.cfg.max_conditions_per_rule, self.ds.n_features):
                f = int(self.rng.integers(0, self.ds.n_features))
                mf_i = int(self.rng.integers(0, len(self.partition.functions[f])))
                conds.append((f, mf_i))
            elif len(conds) > 1:
                conds.pop(int(self.rng.integers(0, len(conds))))
            else:
                ci = int(self.rng.integers(0, len(conds)))
                f, _ = conds[ci]
                conds[ci] = (f, int(self.rng.integers(0, len(self.partition.functions[f]))))
            rules[ri] = (conds, cons)
        else:
            ri = int(self.rng.integers(0, len(rules)))
            rules[ri] = (rules[ri][0], int(self.rng.integers(0, self.ds.n_classes)))
        return _repair(
            [(tuple(conds), cons) for conds, cons in rules], self.cfg, self.seeded_rule
        )

    def tournament(self, fitness: np.ndarray) -> int:
        picks = self.rng.integers(0, fitness.shape[0], 3)
        best = int(picks[0])
        for p in picks[1:]:
            if fitness[int(p)] > fitness[best]:
                best = int(p)
        return best


def evolve(
    fit_ds: Dataset,
    val_X: np.ndarray,
    val_y: np.ndarray,
    partition: FuzzyPartition,
    cfg: GaConfig,
) -> tuple[Genome, list[float]]:
    """Run the GA; returns the best genome and the per-generation best
    fitness history (non-decreasing under elitism)."""
    rng = np.random.default_rng(cfg.seed)
    breeder = _Breeder(fit_ds, partition, cfg, rng)
    fallback_class = int(np.argmax(np.bincount(fit_ds.labels, minlength=fit_ds.n_classes)))

    population = [
        breeder.individual(seeded=i < (cfg.population_size + 1) // 2)
        for i in range(cfg.population_size)
    ]
    val_X = np.ascontiguousarray(val_X, np.float64)

    def score_all(pop):
        return np.array(
            [_fitness(g, partition, val_X, val_y, fallback_class) for g in pop]
        )

    fitness = score_all(population)
    history = [float(fitness.max())]
    for _ in range(cfg.generations):
        elite = int(np.argmax(fitness))
        next_pop = [population[elite]]
        while len(next_pop) < cfg.population_size:
            a = population[breeder.tournament(fitness)]
            if breeder.rng.random() < cfg.crossover_rate:
                b = population[breeder.tournament(fitness)]
                child = breeder.crossover(a, b)
            else:
                child = a
            if breeder.rng.random() < cfg.mutation_rate:
                child = breeder.mutate(child)
            next_pop.append(child)
        population = next_pop
        fitness = score_all(population)
        history.append(float(fitness.max()))
    best = int(np.argmax(fitness))
    return population[best], history


def fit_fuzzy(ds: Dataset, partition: FuzzyPartition, cfg: GaConfig) -> RuleBase:
    """Evolve a fuzzy rule base on ds and finalize it on the full table.

    Fitness runs on a held-out quarter of ds (seeded stratified split);
    confidences and supports of the winning rule set are then recomputed on
    all of ds. A flagged prior default rule is attached when any training
    sample fires no rule.
    """
    if partition.n_features != ds.n_features:
        raise ValueError("partition does not cover the dataset's features")
    fit_idx, val_idx = stratified_split(ds, test_fraction=0.25, seed=cfg.seed)
    fit_ds = ds.subset(fit_idx)
    genome, _ = evolve(
        fit_ds, ds.samples[val_idx], ds.labels[val_idx], partition, cfg
    )

    priors = ds.class_priors()
    rules = []
    seen_antecedents = []
    for conds, consequent in genome:
        if conds in seen_antecedents:
            continue
        seen_antecedents.append(conds)
        conditions = tuple(
            Condition(feature=f, kind="fuzzy", mf_index=mf_i) for f, mf_i in conds
        )
        onehot = np.zeros(ds.n_classes)
        onehot[consequent] = 1.0
        provisional = Rule(conditions, consequent, onehot, 0.0)
        support, conf, flagged = rule_support_confidence(
            provisional, ds, partition.functions
        )
        rules.append(
            Rule(conditions, int(np.argmax(conf)), conf, support, prior_fallback=flagged)
        )

    base = RuleBase(
        rules=tuple(rules),
        logic="fuzzy",
        structure="flat",
        feature_names=ds.feature_names,
        class_names=ds.class_names,
        class_priors=priors,
        partition=partition.functions,
    )
    from .rules import memberships

    deg = memberships(base, ds.samples)
    if bool(np.any(np.max(deg, axis=1) <= 0.0)):
        default = Rule((), int(np.argmax(priors)), priors, 1.0, prior_fallback=True)
        base = RuleBase(
            rules=base.rules,
            logic="fuzzy",
            structure="flat",
            feature_names=ds.feature_names,
            class_names=ds.class_names,
            class_priors=priors,
            partition=partition.functions,
            default_rule=default,
        )
    return base
