"""Interpretable dynamic feature selection.

Train a rule-based global classifier (a CART bootstrap ensemble or an
evolved fuzzy rule base), then acquire features one at a time for a new
sample, each step picking the feature whose expected post-observation
uncertainty against the global model is lowest. Everything downstream
of training is deterministic given the model, the empirical conditional,
and the policy configuration.
"""

from .bundle import BundleError, LoadedBundle, bundle_dict, dumps, read_bundle, write_bundle
from .cart import CartConfig, CartEnsemble, fit_ensemble
from .data import (
    DataError,
    Dataset,
    DiscretizationScheme,
    EmpiricalConditional,
    PartialObservation,
    fit_discretization,
    imputation_values,
    load_csv,
    stratified_split,
)
from .dfs_engine import (
    ModelAdapter,
    PolicyConfig,
    SessionState,
    Step,
    apply_observation,
    oracle_value,
    run_episode,
    select_next,
)
from .estimator import TrainConfig, ValueNet, build_targets, gradient_check, make_net, train
from .eval_bench import (
    BenchmarkConfig,
    BenchmarkResult,
    calibration_report,
    complexity_metrics,
    logistic_baseline,
    run_benchmark,
    write_benchmark,
)
from .fuzzy import GaConfig, MembershipFunction, fit_fuzzy, fit_partition
from .infotheory import JointTable, cmi, entropy, static_mi_ranking, verify_selection_equivalence
from .rules import Condition, Rule, RuleBase, render_rule, render_rule_base, winner_rule
from .uncertainty import (
    QualityBreakdown,
    aleatoric_u,
    epistemic_cart,
    epistemic_fuzzy,
    kl_divergence,
    quality,
)

__version__ = "0.1.0"

__all__ = [
    "BundleError",
    "LoadedBundle",
    "bundle_dict",
    "dumps",
    "read_bundle",
    "write_bundle",
    "CartConfig",
    "CartEnsemble",
    "fit_ensemble",
    "DataError",
    "Dataset",
    "DiscretizationScheme",
    "EmpiricalConditional",
    "PartialObservation",
    "fit_discretization",
    "imputation_values",
    "load_csv",
    "stratified_split",
    "ModelAdapter",
    "PolicyConfig",
    "SessionState",
    "Step",
    "apply_observation",
    "oracle_value",
    "run_episode",
    "select_next",
    "TrainConfig",
    "ValueNet",
    "build_targets",
    "gradient_check",
    "make_net",
    "train",
    "BenchmarkConfig",
    "BenchmarkResult",
    "calibration_report",
    "complexity_metrics",
    "logistic_baseline",
    "run_benchmark",
    "write_benchmark",
    "GaConfig",
    "MembershipFunction",
    "fit_fuzzy",
    "fit_partition",
    "Condition",
    "Rule",
    "RuleBase",
    "render_rule",
    "render_rule_base",
    "winner_rule",
    "JointTable",
    "cmi",
    "entropy",
    "static_mi_ranking",
    "verify_selection_equivalence",
    "QualityBreakdown",
    "aleatoric_u",
    "epistemic_cart",
    "epistemic_fuzzy",
    "kl_divergence",
    "quality",
    "__version__",
]
