"""Discrete information measures and the selection-equivalence verifier.

Everything here works on dense discrete tables, so every quantity is exact
up to float arithmetic and can be checked against brute-force enumeration.
`cmi` computes conditional mutual information twice, once as a KL divergence
between the joint and the product of marginals and once as an entropy
difference, and refuses to answer if the two disagree: the redundancy is the
implementation's own consistency check.

`verify_selection_equivalence` builds small random worlds (at most four features, two
or three bins each) in which the sub-model prediction for any observed
subset is defined as the probability-weighted average of the global model's
predictions over the unseen features. Under that construction, picking the
feature with maximal conditional mutual information and picking the feature
whose acquisition minimizes the expected aleatoric divergence are provably
the same choice at every reachable state, and the expected divergence drop
from acquiring a feature equals its conditional mutual information. The
verifier enumerates all states exhaustively and checks both facts
numerically. A control mode replaces the averaged sub-models with unrelated
random tables, in which case disagreements are expected and are reported
rather than failed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .data import Dataset, DiscretizationScheme

_TABLE_TOL = 1e-9
_TIE_TOL = 1e-12


def entropy(dist) -> float:
    """Shannon entropy in nats, with 0 * ln 0 = 0."""
    p = np.asarray(dist, np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("entropy expects a non-empty probability vector")
    if np.any(p < 0) or abs(float(p.sum()) - 1.0) > _TABLE_TOL:
        raise ValueError("entropy expects a normalized distribution")
    pos = p[p > 0.0]
    return float(-(pos * np.log(pos)).sum())


@dataclass(frozen=True, eq=False)
class JointTable:
    """Dense probability table over (bins of one feature) x (classes)."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, np.float64)
        if t.ndim != 2 or t.size == 0:
            raise ValueError("joint table must be a non-empty 2-D array")
        if np.any(t < 0) or abs(float(t.sum()) - 1.0) > _TABLE_TOL:
            raise ValueError("joint table entries must be >= 0 and sum to 1")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @classmethod
    def from_counts(cls, counts) -> "JointTable":
        c = np.asarray(counts, np.float64)
        total = float(c.sum())
        if total <= 0:
            raise ValueError("counts must contain at least one observation")
        return cls(c / total)


def cmi(jt: JointTable) -> float:
    """Mutual information between the table's axes, in nats.

    Computed both as KL(joint || product of marginals) and as
    H(y) - H(y | x); the call fails if the two disagree beyond 1e-9.
    Tiny negative round-off is clamped to 0.
    """
    t = jt.table
    row = t.sum(axis=1)
    col = t.sum(axis=0)

    mask = t > 0.0
    outer = np.outer(row, col)
    kl_form = float(np.sum(t[mask] * np.log(t[mask] / outer[mask])))

    h_cond = 0.0
    for b in range(t.shape[0]):
        if row[b] > 0.0:
            h_cond += row[b] * entropy(t[b] / row[b])
    ent_form = entropy(col / float(col.sum())) - h_cond

    if abs(kl_form - ent_form) > _TABLE_TOL:
        raise RuntimeError(
            f"mutual-information formulations disagree: "
            f"kl={kl_form!r} entropy-difference={ent_form!r}"
        )
    return max(0.0, kl_form)


def static_mi_ranking(ds: Dataset, scheme: DiscretizationScheme) -> list[int]:
    """Features sorted by decreasing mutual information with the label,
    measured on the discretized training data; ties keep the lower index."""
    bins = scheme.assign_all(ds.samples)
    scores = np.empty(ds.n_features)
    for i in range(ds.n_features):
        counts = np.zeros((scheme.n_bins(i), ds.n_classes))
        np.add.at(counts, (bins[:, i], ds.labels), 1.0)
        scores[i] = cmi(JointTable.from_counts(counts))
    order = sorted(range(ds.n_features), key=lambda i: (-scores[i], i))
    return order


# ---------------------------------------------------------------------------
# exhaustive selection-equivalence verifier
# ---------------------------------------------------------------------------

def _entropy_rows(q: np.ndarray) -> np.ndarray:
    # strictly positive rows by construction
    return -np.sum(q * np.log(q), axis=1)


def _subset_tables(cfg_vals, arities, p, g, subset, rng):
    """Group the full configuration table by the subset's value assignment.

    Returns (group index per config, group mass, per-group prediction,
    per-group entropy, per-group expected divergence to the global model).
    When rng is given the per-group predictions are random tables instead of
    probability-weighted averages (the inconsistent control construction).
    """
    n_cfg = cfg_vals.shape[0]
    if subset:
        cols = [cfg_vals[:, f] for f in subset]
        keys = np.ravel_multi_index(cols, [arities[f] for f in subset])
        uniq, first, gidx = np.unique(keys, return_index=True, return_inverse=True)
        n_groups = uniq.shape[0]
    else:
        gidx = np.zeros(n_cfg, np.int64)
        first = np.zeros(1, np.int64)
        n_groups = 1
    pg = np.bincount(gidx, weights=p, minlength=n_groups)
    if rng is None:
        qg = np.empty((n_groups, g.shape[1]))
        for c in range(g.shape[1]):
            qg[:, c] = np.bincount(gidx, weights=p * g[:, c], minlength=n_groups)
        qg /= pg[:, None]
    else:
        qg = 0.9 * rng.dirichlet(np.ones(g.shape[1]), n_groups) + 0.1 / g.shape[1]
    ent = _entropy_rows(qg)
    # exact divergence, no smoothing: every entry is strictly positive
    kl_cfg = np.sum(g * np.log(g / qg[gidx]), axis=1)
    ug = np.bincount(gidx, weights=p * kl_cfg, minlength=n_groups) / pg
    return gidx, first, pg, qg, ent, ug


def _random_world(rng):
    m = int(rng.integers(1, 5))
    arities = [int(a) for a in rng.integers(2, 4, size=m)]
    n_classes = int(rng.integers(2, 4))
    n_cfg = int(np.prod(arities))
    cfg_vals = np.indices(arities).reshape(m, n_cfg).T
    p = 0.9 * rng.dirichlet(np.ones(n_cfg)) + 0.1 / n_cfg
    g = 0.9 * rng.dirichlet(np.ones(n_classes), n_cfg) + 0.1 / n_classes
    return m, arities, n_classes, cfg_vals, p, g


def _serialize_world(m, arities, n_classes, p, g, subset, note):
    return {
        "n_features": m,
        "arities": arities,
        "n_classes": n_classes,
        "joint_probability": [float(v) for v in p],
        "global_model": [[float(v) for v in row] for row in g],
        "observed_subset": list(subset),
        "note": note,
    }


def verify_selection_equivalence(trials: int, seed: int = 0, consistent: bool = True) -> dict:
    """Exhaustively check, on random constructed worlds, that maximizing
    conditional mutual information and minimizing expected aleatoric
    divergence select the same feature at every reachable state, and that
    the divergence drop equals the mutual information.

    With consistent=False the sub-models are unrelated random tables; the
    equivalence has no reason to hold there, so mismatches are reported but
    the run still passes (it is the control group).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    start = time.perf_counter()
    seeds = np.random.SeedSequence(seed).spawn(trials)
    states_checked = 0
    matches = 0
    mismatches = 0
    max_dev = 0.0
    examples: list[dict] = []

    for t in range(trials):
        rng = np.random.default_rng(seeds[t])
        m, arities, n_classes, cfg_vals, p, g = _random_world(rng)

        tables = {}
        for size in range(m + 1):
            for subset in combinations(range(m), size):
                ctrl = rng if not consistent else None
                tables[subset] = _subset_tables(cfg_vals, arities, p, g, subset, ctrl)

        for size in range(m):
            for subset in combinations(range(m), size):
                gidx_s, _, pg_s, _, ent_s, ug_s = tables[subset]
                n_states = pg_s.shape[0]
                cands = [i for i in range(m) if i not in subset]
                cmi_mat = np.empty((n_states, len(cands)))
                eu_mat = np.empty((n_states, len(cands)))
                for ci, i in enumerate(cands):
                    sup = tuple(sorted(subset + (i,)))
                    gidx_t, first_t, pg_t, _, ent_t, ug_t = tables[sup]
                    proj = gidx_s[first_t]
                    w = pg_t
                    eu = np.bincount(proj, weights=w * ug_t, minlength=n_states) / pg_s
                    h_cond = np.bincount(proj, weights=w * ent_t, minlength=n_states) / pg_s
                    cmi_mat[:, ci] = ent_s - h_cond
                    eu_mat[:, ci] = eu
                    dev = float(np.max(np.abs(cmi_mat[:, ci] - (ug_s - eu))))
                    if dev > max_dev:
                        max_dev = dev
                states_checked += n_states
                pick_cmi = np.argmax(cmi_mat, axis=1)
                pick_u = np.argmin(eu_mat, axis=1)
                rows = np.arange(n_states)
                tied = (
                    np.abs(cmi_mat[rows, pick_cmi] - cmi_mat[rows, pick_u]) < _TIE_TOL
                ) & (np.abs(eu_mat[rows, pick_cmi] - eu_mat[rows, pick_u]) < _TIE_TOL)
                ok = (pick_cmi == pick_u) | tied
                matches += int(ok.sum())
                bad = int(n_states - ok.sum())
                mismatches += bad
                if bad and len(examples) < 3:
                    row = int(rows[~ok][0])
                    examples.append(
                        _serialize_world(
                            m, arities, n_classes, p, g, subset,
                            f"state row {row}: cmi picks feature "
                            f"{cands[int(pick_cmi[row])]}, expected-divergence "
                            f"picks feature {cands[int(pick_u[row])]}",
                        )
                    )

    elapsed = time.perf_counter() - start
    passed = (mismatches == 0 and max_dev <= _TABLE_TOL) if consistent else True
    return {
        "trials": trials,
        "seed": seed,
        "consistent_submodels": consistent,
        "states_checked": states_checked,
        "matches": matches,
        "mismatches": mismatches,
        "mismatch_examples": examples,
        "max_identity_deviation": max_dev,
        "elapsed_seconds": elapsed,
        "passed": passed,
    }
