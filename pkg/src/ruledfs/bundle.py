"""Model bundle serialization.

A bundle is one JSON document holding everything a service or benchmark
needs to resume from a training run: dataset metadata, the exact split,
the trained rule base(s), the discretized empirical conditional, the
imputation vector, the acquisition policy, and optionally a trained value
network. Serialization is canonical (sorted keys, compact separators) so
equal models produce byte-identical files; NaN never appears, and the
infinite interval bounds of root-level tree rules travel as nulls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cart import CartConfig, CartEnsemble
from .data import DiscretizationScheme, EmpiricalConditional
from .dfs_engine import ModelAdapter, PolicyConfig
from .estimator import ValueNet
from .fuzzy import GaConfig
from .rules import Condition, MembershipFunction, Rule, RuleBase

FORMAT = "ruledfs-bundle/1"


class BundleError(ValueError):
    """Raised when a bundle file is malformed or inconsistent."""


def _num(x: float) -> float | None:
    x = float(x)
    if math.isnan(x):
        raise BundleError("NaN is not representable in a bundle")
    if math.isinf(x):
        return None
    return x


def _unnum(x, positive: bool) -> float:
    if x is None:
        return math.inf if positive else -math.inf
    return float(x)


def _condition_dict(c: Condition) -> dict:
    return {
        "feature": c.feature,
        "kind": c.kind,
        "lo": _num(c.lo),
        "hi": _num(c.hi),
        "closed_lo": c.closed_lo,
        "mf_index": c.mf_index,
    }


def _condition_from(d: dict) -> Condition:
    return Condition(
        feature=int(d["feature"]),
        kind=d["kind"],
        lo=_unnum(d["lo"], positive=False),
        hi=_unnum(d["hi"], positive=True),
        closed_lo=bool(d["closed_lo"]),
        mf_index=int(d["mf_index"]),
    )


def _rule_dict(r: Rule) -> dict:
    return {
        "conditions": [_condition_dict(c) for c in r.conditions],
        "consequent": r.consequent,
        "confidence": [_num(v) for v in r.confidence],
        "support": _num(r.support),
        "prior_fallback": r.prior_fallback,
    }


def _rule_from(d: dict) -> Rule:
    return Rule(
        conditions=tuple(_condition_from(c) for c in d["conditions"]),
        consequent=int(d["consequent"]),
        confidence=np.array(d["confidence"], np.float64),
        support=float(d["support"]),
        prior_fallback=bool(d["prior_fallback"]),
    )


def _mf_dict(mf: MembershipFunction) -> dict:
    return {"name": mf.name, "l": _num(mf.l), "m1": _num(mf.m1), "m2": _num(mf.m2), "r": _num(mf.r)}


def _mf_from(d: dict) -> MembershipFunction:
    return MembershipFunction(d["name"], float(d["l"]), float(d["m1"]), float(d["m2"]), float(d["r"]))


def _rulebase_dict(rb: RuleBase) -> dict:
    return {
        "logic": rb.logic,
        "structure": rb.structure,
        "class_priors": [_num(v) for v in rb.class_priors],
        "rules": [_rule_dict(r) for r in rb.rules],
        "partition": (
            None if rb.partition is None
            else [[_mf_dict(mf) for mf in row] for row in rb.partition]
        ),
        "default_rule": None if rb.default_rule is None else _rule_dict(rb.default_rule),
    }


def _rulebase_from(d: dict, feature_names, class_names) -> RuleBase:
    return RuleBase(
        rules=tuple(_rule_from(r) for r in d["rules"]),
        logic=d["logic"],
        structure=d["structure"],
        feature_names=tuple(feature_names),
        class_names=tuple(class_names),
        class_priors=np.array(d["class_priors"], np.float64),
        partition=(
            None if d["partition"] is None
            else tuple(tuple(_mf_from(mf) for mf in row) for row in d["partition"])
        ),
        default_rule=None if d["default_rule"] is None else _rule_from(d["default_rule"]),
    )


def _cart_config_dict(cfg: CartConfig) -> dict:
    return {
        "max_depth": cfg.max_depth,
        "min_samples_leaf": cfg.min_samples_leaf,
        "bootstrap_count": cfg.bootstrap_count,
        "seed": cfg.seed,
    }


def _ga_config_dict(cfg: GaConfig) -> dict:
    return {
        "population_size": cfg.population_size,
        "generations": cfg.generations,
        "max_rules": cfg.max_rules,
        "max_conditions_per_rule": cfg.max_conditions_per_rule,
        "mutation_rate": cfg.mutation_rate,
        "crossover_rate": cfg.crossover_rate,
        "seed": cfg.seed,
    }


def _policy_dict(cfg: PolicyConfig) -> dict:
    return {
        "lam": _num(cfg.lam),
        "theta": None if cfg.theta is None else _num(cfg.theta),
        "budget": cfg.budget,
        "u_halt_threshold": _num(cfg.u_halt_threshold),
        "value_source": cfg.value_source,
    }


def bundle_dict(
    *,
    dataset_meta: dict,
    split: dict,
    kind: str,
    adapter: ModelAdapter,
    ec: EmpiricalConditional,
    policy: PolicyConfig,
    cart_config: CartConfig | None = None,
    ga_config: GaConfig | None = None,
    seed: int = 0,
) -> dict:
    """Assemble the canonical bundle document from trained components."""
    if kind == "cart":
        if adapter.ensemble is None:
            raise BundleError("cart bundle requires the ensemble")
        primary = _rulebase_dict(adapter.ensemble.primary)
        auxiliaries = [_rulebase_dict(rb) for rb in adapter.ensemble.auxiliaries]
    elif kind == "fuzzy":
        primary = _rulebase_dict(adapter.rule_base)
        auxiliaries = []
    else:
        raise BundleError(f"unknown model kind: {kind!r}")
    return {
        "format": FORMAT,
        "seed": seed,
        "dataset": dataset_meta,
        "split": {
            "seed": split["seed"],
            "test_fraction": _num(split["test_fraction"]),
            "train_indices": [int(i) for i in split["train_indices"]],
            "test_indices": [int(i) for i in split["test_indices"]],
        },
        "model": {
            "kind": kind,
            "cart_config": None if cart_config is None else _cart_config_dict(cart_config),
            "ga_config": None if ga_config is None else _ga_config_dict(ga_config),
            "primary": primary,
            "auxiliaries": auxiliaries,
        },
        "conditional": {
            "alpha": _num(ec.alpha),
            "edges": [[_num(v) for v in e] for e in ec.scheme.edges],
            "representatives": [[_num(v) for v in r] for r in ec.scheme.representatives],
            "train_bins": ec.train_bins.tolist(),
        },
        "imputation": [_num(v) for v in adapter.imputation],
        "policy": _policy_dict(policy),
        "estimator": None if adapter.value_net is None else adapter.value_net.to_dict(),
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def write_bundle(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(doc))


@dataclass(frozen=True, eq=False)
class LoadedBundle:
    doc: dict
    kind: str
    adapter: ModelAdapter
    ec: EmpiricalConditional
    policy: PolicyConfig
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]
    cart_config: CartConfig | None
    ga_config: GaConfig | None

    @property
    def dataset_meta(self) -> dict:
        return self.doc["dataset"]

    @property
    def split(self) -> dict:
        return self.doc["split"]


def from_doc(doc: dict) -> LoadedBundle:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise BundleError(f"not a {FORMAT} document")
    for key in ("dataset", "split", "model", "conditional", "imputation", "policy"):
        if key not in doc:
            raise BundleError(f"bundle is missing the {key!r} section")
    meta = doc["dataset"]
    feature_names = tuple(meta["feature_names"])
    class_names = tuple(meta["class_names"])
    model = doc["model"]
    kind = model["kind"]
    try:
        primary = _rulebase_from(model["primary"], feature_names, class_names)
        cart_config = (
            None if model["cart_config"] is None else CartConfig(**model["cart_config"])
        )
        ga_config = None if model["ga_config"] is None else GaConfig(**model["ga_config"])
        imputation = np.array(doc["imputation"], np.float64)
        cond = doc["conditional"]
        scheme = DiscretizationScheme(
            edges=tuple(np.array(e, np.float64) for e in cond["edges"]),
            representatives=tuple(np.array(r, np.float64) for r in cond["representatives"]),
        )
        ec = EmpiricalConditional(
            scheme=scheme,
            train_bins=np.array(cond["train_bins"], np.int64),
            alpha=float(cond["alpha"]),
        )
        pol = doc["policy"]
        policy = PolicyConfig(
            lam=float(pol["lam"]),
            theta=None if pol["theta"] is None else float(pol["theta"]),
            budget=int(pol["budget"]),
            u_halt_threshold=float(pol["u_halt_threshold"]),
            value_source=pol["value_source"],
        )
        value_net = (
            None if doc.get("estimator") is None else ValueNet.from_dict(doc["estimator"])
        )
        if kind == "cart":
            if cart_config is None:
                raise BundleError("cart bundle is missing its cart_config")
            auxiliaries = tuple(
                _rulebase_from(rb, feature_names, class_names) for rb in model["auxiliaries"]
            )
            ensemble = CartEnsemble(
                primary=primary,
                auxiliaries=auxiliaries,
                imputation=imputation,
                config=cart_config,
            )
            adapter = ModelAdapter.for_ensemble(ensemble, value_net=value_net)
        elif kind == "fuzzy":
            adapter = ModelAdapter.for_fuzzy(primary, imputation, value_net=value_net)
        else:
            raise BundleError(f"unknown model kind: {kind!r}")
    except BundleError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"malformed bundle: {exc}") from exc
    if ec.train_bins.shape[1] != len(feature_names):
        raise BundleError("conditional table width does not match the feature count")
    if imputation.shape[0] != len(feature_names):
        raise BundleError("imputation width does not match the feature count")
    return LoadedBundle(
        doc=doc,
        kind=kind,
        adapter=adapter,
        ec=ec,
        policy=policy,
        feature_names=feature_names,
        class_names=class_names,
        cart_config=cart_config,
        ga_config=ga_config,
    )


def read_bundle(path: str) -> LoadedBundle:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise BundleError(f"bundle is not valid JSON: {exc}") from exc
    return from_doc(doc)
