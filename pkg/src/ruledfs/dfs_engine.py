"""Greedy acquisition loop: candidate scoring, pruning, stopping rules, and
the session state machine shared by the benchmark harness, CLI, and service.

At every step the engine scores each candidate feature by the expected
combined uncertainty after observing it (expectation over the empirical
conditional of that feature given what is already observed, completions
placed at per-bin representative values) and queries the argmin. Candidates
are restricted to features that appear in rules whose truth degree still
exceeds theta: rules already dead on the observed evidence cannot win, so
their exclusive features cannot change the prediction.

The aleatoric term compares the sub-model's partial-information prediction
against a fixed reference. In benchmark mode the reference is the model's
prediction on the fully observed true sample. In interactive mode the true
sample is unknown, so the reference is the model's prediction on the
mean-imputed completion of the current observations, recomputed each step;
every report derived from that mode carries the annotation
"reference = imputed-global".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cart import CartEnsemble, predict_imputed
from .data import EmpiricalConditional, PartialObservation, conditional_distribution
from .rules import RuleBase, predict, render_rule, truth_degrees, winner_rule
from .uncertainty import (
    QualityBreakdown,
    aleatoric_u,
    epistemic_cart,
    epistemic_fuzzy,
)

STATUS_ACTIVE = "active"
STATUS_EXHAUSTED = "exhausted"
STATUS_HALTED = "halted"

HALT_EMPTY = "active set empty"
HALT_U = "u below threshold"
HALT_BUDGET = "budget reached"

REFERENCE_NOTE = "reference = imputed-global"


@dataclass(frozen=True)
class PolicyConfig:
    lam: float = 0.1
    theta: float | None = None  # None: 0 for crisp logic, 0.05 for fuzzy
    budget: int = 10
    u_halt_threshold: float = 0.0  # 0 disables the check
    value_source: str = "oracle"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.theta is not None and not 0.0 <= self.theta < 1.0:
            raise ValueError("theta must lie in [0, 1)")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.u_halt_threshold < 0:
            raise ValueError("u_halt_threshold must be >= 0")
        if self.value_source not in ("oracle", "estimator"):
            raise ValueError("value_source must be 'oracle' or 'estimator'")


@dataclass(frozen=True, eq=False)
class ModelAdapter:
    """Uniform facade over the two global-model families.

    kind="cart" carries the bootstrap ensemble (primary rule base predicts,
    auxiliaries feed the disagreement term); kind="fuzzy" carries a single
    evolved rule base. `imputation` holds per-feature training means (modes
    for categoricals) used for the interactive reference prediction.
    """

    kind: str
    rule_base: RuleBase
    imputation: np.ndarray
    ensemble: CartEnsemble | None = None
    value_net: object | None = None

    def __post_init__(self):
        if self.kind not in ("cart", "fuzzy"):
            raise ValueError("kind must be 'cart' or 'fuzzy'")
        if self.kind == "cart" and self.ensemble is None:
            raise ValueError("cart adapter requires the ensemble")
        if self.imputation.shape[0] != self.rule_base.n_features:
            raise ValueError("imputation width must match the feature count")

    @classmethod
    def for_ensemble(cls, ensemble: CartEnsemble, value_net=None) -> "ModelAdapter":
        return cls(
            kind="cart",
            rule_base=ensemble.primary,
            imputation=ensemble.imputation,
            ensemble=ensemble,
            value_net=value_net,
        )

    @classmethod
    def for_fuzzy(cls, rule_base: RuleBase, imputation, value_net=None) -> "ModelAdapter":
        return cls(
            kind="fuzzy",
            rule_base=rule_base,
            imputation=np.asarray(imputation, np.float64),
            value_net=value_net,
        )

    @property
    def n_features(self) -> int:
        return self.rule_base.n_features

    def theta(self, cfg: PolicyConfig) -> float:
        if cfg.theta is not None:
            return cfg.theta
        return 0.05 if self.kind == "fuzzy" else 0.0

    def predict_partial(self, obs: PartialObservation) -> np.ndarray:
        """Sub-model prediction on partial information. Trees cannot consume
        a partial vector, so the cart family mean-imputes and traverses; the
        fuzzy family evaluates truth degrees with unobserved conditions
        counting as fully satisfied."""
        if self.kind == "cart":
            return predict_imputed(self.ensemble, obs, "primary")
        return predict(self.rule_base, obs)

    def epistemic(self, obs: PartialObservation) -> float:
        if self.kind == "cart":
            return epistemic_cart(self.ensemble, obs)
        return epistemic_fuzzy(self.rule_base, obs)

    def predict_full(self, sample) -> np.ndarray:
        return predict(self.rule_base, PartialObservation.full(sample))

    def imputed_reference(self, obs: PartialObservation) -> np.ndarray:
        filled = np.where(obs.observed, obs.values, self.imputation)
        return self.predict_full(filled)

    def active_candidates(self, obs: PartialObservation, cfg: PolicyConfig) -> list[int]:
        """Features that can still change what the policy measures. For the
        cart family this unions over every ensemble member: the epistemic
        term reads the auxiliaries, so a feature alive only in an auxiliary
        tree still matters."""
        theta = self.theta(cfg)
        if self.kind == "fuzzy":
            return active_features(self.rule_base, obs, theta)
        alive: set[int] = set()
        for member in self.ensemble.members:
            alive.update(active_features(member, obs, theta))
        return sorted(alive)

    def winner_text(self, obs: PartialObservation) -> str:
        return self.winner_details(obs)[0]

    def winner_details(self, obs: PartialObservation) -> tuple[str, np.ndarray, float]:
        """(rendered text, confidence vector, support) of the rule backing
        the current prediction; the no-fire fallback reports class priors
        with support 0."""
        if self.kind == "cart":
            obs = PartialObservation.full(self.ensemble.fill(obs))
        idx, _ = winner_rule(self.rule_base, obs)
        if idx >= 0:
            rule = self.rule_base.rules[idx]
        elif self.rule_base.default_rule is not None:
            rule = self.rule_base.default_rule
        else:
            return (
                "no rule fired; class priors used",
                self.rule_base.class_priors,
                0.0,
            )
        return render_rule(rule, self.rule_base), rule.confidence, rule.support


@dataclass(frozen=True, eq=False)
class Step:
    feature: int
    value: float
    breakdown: QualityBreakdown
    prediction: np.ndarray
    u: float
    e: float
    winner_text: str

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "value": self.value,
            "breakdown": self.breakdown.to_dict(),
            "prediction": [float(p) for p in self.prediction],
            "u": self.u,
            "e": self.e,
            "winner_rule": self.winner_text,
        }


@dataclass(eq=False)
class SessionState:
    observation: PartialObservation
    budget: int
    trace: list[Step] = field(default_factory=list)
    status: str = STATUS_ACTIVE
    halt_reason: str | None = None
    label: int | None = None

    @classmethod
    def fresh(cls, n_features: int, budget: int, label: int | None = None) -> "SessionState":
        return cls(
            observation=PartialObservation.empty(n_features), budget=budget, label=label
        )

    @property
    def done(self) -> bool:
        return self.status != STATUS_ACTIVE


def active_features(rb: RuleBase, obs: PartialObservation, theta: float) -> list[int]:
    """Unobserved features that can still influence the winner: the union of
    features over rules whose truth degree exceeds theta. A rule with any
    observed condition already false has degree 0 and is skipped wholesale."""
    degrees = truth_degrees(rb, obs)
    alive: set[int] = set()
    for rule, degree in zip(rb.rules, degrees):
        if degree > theta:
            alive.update(rule.features())
    return sorted(f for f in alive if not obs.observed[f])


def oracle_value(
    i: int,
    obs: PartialObservation,
    adapter: ModelAdapter,
    ec: EmpiricalConditional,
    cfg: PolicyConfig,
    global_ref: np.ndarray,
) -> tuple[float, float, float]:
    """Expected (u, e, q) after observing feature i, the expectation running
    over the empirical conditional of i's bins given current observations
    with each bin collapsed to its representative value."""
    if obs.observed[i]:
        raise ValueError(f"feature {i} is already observed")
    if adapter.n_features != obs.values.shape[0]:
        raise ValueError("observation width does not match the model")
    probs = conditional_distribution(ec, obs, i)
    reps = ec.scheme.representatives[i]
    weights = []
    u_vals = []
    e_vals = []
    for b in range(probs.shape[0]):
        p_b = float(probs[b])
        if p_b == 0.0:
            continue
        completed = obs.with_feature(i, float(reps[b]))
        sub_pred = adapter.predict_partial(completed)
        weights.append(p_b)
        u_vals.append(aleatoric_u(global_ref, sub_pred))
        e_vals.append(adapter.epistemic(completed))
    # Constant integrand needs no weighting; returning it directly keeps the
    # score of a prediction-neutral candidate independent of rounding in the
    # bin weights, which is what makes pruning outcome-preserving.
    if all(u == u_vals[0] for u in u_vals) and all(e == e_vals[0] for e in e_vals):
        expected_u, expected_e = u_vals[0], e_vals[0]
    else:
        expected_u = 0.0
        expected_e = 0.0
        for p_b, u_b, e_b in zip(weights, u_vals, e_vals):
            expected_u += p_b * u_b
            expected_e += p_b * e_b
    q = expected_u + cfg.lam * expected_e
    return expected_u, expected_e, q


def select_next(
    state: SessionState,
    adapter: ModelAdapter,
    ec: EmpiricalConditional,
    cfg: PolicyConfig,
    global_ref: np.ndarray,
    prune: bool = True,
) -> tuple[int, QualityBreakdown] | None:
    """Pick the next feature to query, or record why the episode stops.

    Halt precedence: all features observed (exhausted) > empty active set >
    u at or below the threshold (when enabled) > budget spent. Returns None
    after writing status and halt reason to the state. prune=False scores
    every unobserved feature instead of the active set (diagnostic mode for
    checking that pruning never changes the outcome).

    Pruned scoring also includes the lowest-index feature outside the active
    set. Inactive candidates all score the same constant quality (observing
    them cannot move any still-viable rule), and the unpruned argmin breaks
    that tie toward the lowest index, so carrying exactly that one stand-in
    makes both modes choose identically.
    """
    if state.done:
        return None
    obs = state.observation
    if state.observation.n_observed == adapter.n_features:
        state.status = STATUS_EXHAUSTED
        return None
    unobserved = [i for i in range(adapter.n_features) if not obs.observed[i]]
    active = adapter.active_candidates(obs, cfg)
    if not active:
        # no alive rule mentions an unobserved feature, so the prediction is
        # frozen; stopping is a policy decision and binds in both modes
        state.status = STATUS_HALTED
        state.halt_reason = HALT_EMPTY
        return None
    if prune:
        inactive = sorted(set(unobserved) - set(active))
        candidates = sorted(active + inactive[:1]) if inactive else sorted(active)
    else:
        candidates = unobserved
    if cfg.u_halt_threshold > 0.0:
        current_u = aleatoric_u(global_ref, adapter.predict_partial(obs))
        if current_u <= cfg.u_halt_threshold:
            state.status = STATUS_HALTED
            state.halt_reason = HALT_U
            return None
    if len(state.trace) >= cfg.budget:
        state.status = STATUS_HALTED
        state.halt_reason = HALT_BUDGET
        return None

    n = len(candidates)
    exp_u = np.empty(n)
    exp_e = np.empty(n)
    if cfg.value_source == "estimator":
        if adapter.value_net is None:
            raise ValueError("value_source is 'estimator' but no value network is attached")
        sub_pred = adapter.predict_partial(obs)
        u_hat, e_hat = adapter.value_net.predict_values(obs, sub_pred)
        # the network approximates non-negative divergences; clamp the noise
        for ci, i in enumerate(candidates):
            exp_u[ci] = max(u_hat[i], 0.0)
            exp_e[ci] = max(e_hat[i], 0.0)
    else:
        for ci, i in enumerate(candidates):
            exp_u[ci], exp_e[ci], _ = oracle_value(i, obs, adapter, ec, cfg, global_ref)
    q = exp_u + cfg.lam * exp_e
    chosen = candidates[int(np.argmin(q))]  # candidates ascending: ties -> lowest index
    breakdown = QualityBreakdown(
        candidates=tuple(candidates),
        expected_u=exp_u,
        expected_e=exp_e,
        lam=cfg.lam,
        chosen=chosen,
    )
    return chosen, breakdown


def apply_observation(
    state: SessionState,
    feature: int,
    value: float,
    breakdown: QualityBreakdown,
    adapter: ModelAdapter,
    global_ref: np.ndarray,
) -> Step:
    """Record one observed value and the post-observation diagnostics."""
    state.observation = state.observation.with_feature(feature, value)
    obs = state.observation
    prediction = adapter.predict_partial(obs)
    step = Step(
        feature=feature,
        value=float(value),
        breakdown=breakdown,
        prediction=prediction,
        u=aleatoric_u(global_ref, prediction),
        e=adapter.epistemic(obs),
        winner_text=adapter.winner_text(obs),
    )
    state.trace.append(step)
    return step


def run_episode(
    sample,
    label: int | None,
    adapter: ModelAdapter,
    ec: EmpiricalConditional,
    cfg: PolicyConfig,
    prune: bool = True,
) -> SessionState:
    """Benchmark-mode episode: the true sample is known, queried features
    reveal their true values, and the aleatoric reference is the model's
    prediction on the full sample (fixed for the whole episode)."""
    sample = np.asarray(sample, np.float64)
    global_ref = adapter.predict_full(sample)
    state = SessionState.fresh(adapter.n_features, cfg.budget, label=label)
    while True:
        selected = select_next(state, adapter, ec, cfg, global_ref, prune=prune)
        if selected is None:
            return state
        feature, breakdown = selected
        apply_observation(
            state, feature, float(sample[feature]), breakdown, adapter, global_ref
        )
