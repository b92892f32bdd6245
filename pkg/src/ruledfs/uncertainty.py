"""Uncertainty calculus for acquisition decisions.

Aleatoric uncertainty is the KL divergence from the global-model prediction
to the sub-model prediction on the current observation subset. Epistemic
uncertainty measures model self-disagreement: the truth-degree-weighted KL
of every rule's confidence against the winner's (fuzzy bases), or the mean
KL of bootstrap members' winner confidences against the primary's (tree
ensembles). The combined selection score is q = u + lambda * e.

All divergences use the natural logarithm and epsilon-smoothing: both
distributions get 1e-9 added to every entry and are renormalized, which
keeps rule confidences from pure leaves (exact zeros) finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PartialObservation
from .rules import RuleBase, truth_degrees, winner_rule

KL_EPS = 1e-9


def kl_divergence(p, q, eps: float = KL_EPS) -> float:
    """Smoothed KL(p || q) in nats; non-negative, zero when p equals q."""
    p = np.asarray(p, np.float64)
    q = np.asarray(q, np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("kl_divergence needs two equal-length vectors")
    ps = (p + eps) / (p.sum() + eps * p.size)
    qs = (q + eps) / (q.sum() + eps * q.size)
    return float(np.sum(ps * np.log(ps / qs)))


def aleatoric_u(global_pred, sub_pred) -> float:
    """KL from the global-model prediction to the sub-model prediction."""
    return kl_divergence(global_pred, sub_pred)


def epistemic_naive(rb: RuleBase, obs: PartialObservation) -> float:
    """One minus the winner's truth degree; diagnostic only, never used by
    the selection policy (high confidence in a wrong region looks certain)."""
    _, degree = winner_rule(rb, obs)
    return 1.0 - degree


def epistemic_fuzzy(rb: RuleBase, obs: PartialObservation) -> float:
    """Degree-weighted KL of every rule's confidence to the winner's.

    The winner's own term is included (it is zero); the sum is not
    normalized. The declared default rule stays outside the sum. When no
    rule fires the sum is empty and the value is 0.
    """
    deg = truth_degrees(rb, obs)
    j = int(np.argmax(deg))
    if deg[j] <= 0.0:
        return 0.0
    kl_to_winner = _pairwise_kl(rb)[:, j]
    return float(np.dot(deg, kl_to_winner))


def epistemic_cart(ensemble, obs: PartialObservation) -> float:
    """Mean KL of each auxiliary member's winner confidence against the
    primary's, all evaluated on the mean-imputed completion of obs."""
    confs = ensemble.member_confidences(obs)
    total = 0.0
    for i in range(1, confs.shape[0]):
        total += kl_divergence(confs[i], confs[0])
    return total / (confs.shape[0] - 1)


def quality(u_val: float, e_val: float, lam: float) -> float:
    """Combined selection score u + lambda * e."""
    if u_val < 0 or e_val < 0 or lam < 0:
        raise ValueError("u, e, and lambda must be non-negative")
    return u_val + lam * e_val


@dataclass(frozen=True, eq=False)
class QualityBreakdown:
    """Per-candidate expected uncertainties at one decision point."""

    candidates: tuple[int, ...]
    expected_u: np.ndarray
    expected_e: np.ndarray
    lam: float
    chosen: int

    def __post_init__(self):
        eu = np.asarray(self.expected_u, np.float64)
        ee = np.asarray(self.expected_e, np.float64)
        if eu.shape != ee.shape or eu.shape != (len(self.candidates),):
            raise ValueError("one (u, e) pair per candidate required")
        if np.any(eu < 0) or np.any(ee < 0) or self.lam < 0:
            raise ValueError("uncertainties and lambda must be non-negative")
        object.__setattr__(self, "expected_u", eu)
        object.__setattr__(self, "expected_e", ee)

    @property
    def q(self) -> np.ndarray:
        return self.expected_u + self.lam * self.expected_e

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "chosen": self.chosen,
            "candidates": [
                {
                    "feature": int(f),
                    "expected_u": float(self.expected_u[i]),
                    "expected_e": float(self.expected_e[i]),
                    "q": float(self.q[i]),
                }
                for i, f in enumerate(self.candidates)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QualityBreakdown":
        rows = d["candidates"]
        return cls(
            candidates=tuple(int(r["feature"]) for r in rows),
            expected_u=np.array([r["expected_u"] for r in rows], np.float64),
            expected_e=np.array([r["expected_e"] for r in rows], np.float64),
            lam=float(d["lambda"]),
            chosen=int(d["chosen"]),
        )


def _pairwise_kl(rb: RuleBase) -> np.ndarray:
    """(R, R) matrix of kl_divergence between rule confidence vectors,
    cached on the rule base."""
    cached = getattr(rb, "_pairwise_kl_cache", None)
    if cached is None:
        n = rb.n_rules
        cached = np.empty((n, n), np.float64)
        for a in range(n):
            for b in range(n):
                if a == b:
                    cached[a, b] = 0.0
                else:
                    cached[a, b] = kl_divergence(
                        rb.rules[a].confidence, rb.rules[b].confidence
                    )
        object.__setattr__(rb, "_pairwise_kl_cache", cached)
    return cached
