"""Command-line entry point.

Subcommands: train (fit a model and write a bundle + rules text),
benchmark (accuracy/uncertainty curves and the first-10 summary),
verify (the analytic identity suites), serve (the HTTP session service).

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification
failure. A JSON config file may supply any flag's value (keys use the
flag's underscored name); explicit command-line flags win conflicts.
Every subcommand is reproducible given identical flags and seed.
"""

from __future__ import annotations

import argparse
import errno
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import bundle as bundle_mod
from .cart import CartConfig, fit_ensemble
from .data import (
    DataError,
    EmpiricalConditional,
    fit_discretization,
    imputation_values,
    load_csv,
    stratified_split,
)
from .dfs_engine import ModelAdapter, PolicyConfig
from .estimator import TrainConfig, build_targets, make_net, train
from .eval_bench import (
    BenchmarkConfig,
    calibration_report,
    run_benchmark,
    write_benchmark,
    write_calibration,
)
from .fuzzy import GaConfig, fit_fuzzy, fit_partition
from .infotheory import verify_selection_equivalence
from .rules import render_rule_base

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_VERIFY = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this artifact reserves 2 for data
    errors, so usage failures are remapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="ruledfs",
        description="Rule-based dynamic feature selection: train, benchmark, verify, serve.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument(
        "--config",
        default=None,
        metavar="JSON",
        help="JSON file supplying flag defaults; explicit flags win",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add_model_flags(p):
        p.add_argument("--model", choices=("cart", "fuzzy"), default="cart", help="model family")
        p.add_argument("--seed", type=int, default=0, help="master seed (split, model, GA)")
        p.add_argument("--test-fraction", type=float, default=0.2, help="held-out fraction")
        p.add_argument("--bins", type=int, default=5, help="discretization bins per feature")
        p.add_argument("--alpha", type=float, default=1.0, help="Laplace smoothing for the conditional")
        p.add_argument("--max-depth", type=int, default=8, help="tree depth cap")
        p.add_argument("--min-samples-leaf", type=int, default=5, help="leaf size floor")
        p.add_argument("--bootstrap-count", type=int, default=10, help="auxiliary tree count")
        p.add_argument("--population-size", type=int, default=30, help="GA population")
        p.add_argument("--generations", type=int, default=50, help="GA generations")
        p.add_argument("--max-rules", type=int, default=15, help="GA rule cap")
        p.add_argument("--lam", type=float, default=0.1, help="epistemic weight in q = u + lam*e")
        p.add_argument("--budget", type=int, default=10, help="feature acquisition budget")
        p.add_argument(
            "--u-halt-threshold", type=float, default=0.0,
            help="halt when current u falls to this level (0 disables)",
        )

    p_train = sub.add_parser(
        "train", help="fit a model, write bundle + rules.txt",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p_train.add_argument("--data", required=True, help="dataset CSV path")
    p_train.add_argument("--label", default=None, help="label column (default: last column)")
    p_train.add_argument("--out", required=True, help="bundle file path")
    add_model_flags(p_train)
    p_train.add_argument(
        "--estimator", action="store_true",
        help="also train and embed the value network",
    )
    p_train.add_argument("--epochs", type=int, default=20, help="value network epochs")
    p_train.add_argument("--masks-per-sample", type=int, default=1, help="value network target masks per row")

    p_bench = sub.add_parser(
        "benchmark", help="accuracy/uncertainty curves + first-10 summary",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p_bench.add_argument("--bundle", required=True, help="bundle file from `train`")
    p_bench.add_argument("--data", default=None, help="dataset CSV (default: the bundle's source path)")
    p_bench.add_argument("--out", default="runs", help="parent directory for the run directory")
    p_bench.add_argument("--repeats", type=int, default=5, help="seeded re-split/re-train repeats")
    p_bench.add_argument(
        "--value-source", choices=("oracle", "estimator"), default=None,
        help="override the bundle's scoring source",
    )
    p_bench.add_argument("--workers", type=int, default=1, help="episode threads per repeat")
    p_bench.add_argument("--no-prune", action="store_true", help="score all unobserved features")

    p_verify = sub.add_parser(
        "verify", help="run the analytic identity suites",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p_verify.add_argument("--trials", type=int, default=100, help="constructed worlds for the equivalence suite")
    p_verify.add_argument("--seed", type=int, default=0, help="suite seed")
    p_verify.add_argument("--data-dir", default="datasets", help="directory with the benchmark CSVs")
    p_verify.add_argument(
        "--episode-cap", type=int, default=40,
        help="test episodes per dataset in the pruning suite",
    )

    p_serve = sub.add_parser(
        "serve", help="run the HTTP session service",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p_serve.add_argument("--bundle", required=True, help="bundle file from `train`")
    p_serve.add_argument("--host", default="127.0.0.1", help="bind address")
    p_serve.add_argument("--port", type=int, default=8080, help="bind port")
    p_serve.add_argument("--frontend", default=None, help="static frontend directory to mount at /")
    p_serve.add_argument("--traces", default=None, help="JSON-lines file for halted-session traces")
    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> None:
    """Pre-scan for --config and turn its entries into parser defaults so
    explicitly passed flags still win."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return
    if not os.path.isfile(path):
        parser.exit(EXIT_DATA, f"ruledfs: error: file not found: {path}\n")
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        parser.exit(EXIT_DATA, f"ruledfs: error: config is not valid JSON: {exc}\n")
    if not isinstance(cfg, dict):
        parser.exit(EXIT_DATA, "ruledfs: error: config must be a JSON object\n")
    defaults = {str(k).replace("-", "_"): v for k, v in cfg.items()}
    parser.set_defaults(**defaults)
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            sp.set_defaults(**defaults)


def _infer_label(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
    if not header:
        raise DataError(f"{path}: empty header line")
    return header.split(",")[-1].strip()


def _load(path: str, label: str | None):
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    if label is None:
        label = _infer_label(path)
    return load_csv(path, label), label


def _policy_from(args) -> PolicyConfig:
    return PolicyConfig(
        lam=args.lam,
        budget=args.budget,
        u_halt_threshold=args.u_halt_threshold,
    )


def cmd_train(args) -> int:
    try:
        ds, label = _load(args.data, args.label)
    except FileNotFoundError as exc:
        print(f"file not found: {exc.args[0]}", file=sys.stderr)
        return EXIT_DATA
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    tr_idx, te_idx = stratified_split(ds, args.test_fraction, seed=args.seed)
    train_ds = ds.subset(tr_idx)
    cart_cfg = None
    ga_cfg = None
    if args.model == "cart":
        cart_cfg = CartConfig(
            max_depth=args.max_depth,
            min_samples_leaf=args.min_samples_leaf,
            bootstrap_count=args.bootstrap_count,
            seed=args.seed,
        )
        ensemble = fit_ensemble(train_ds, cart_cfg)
        adapter = ModelAdapter.for_ensemble(ensemble)
        rb = ensemble.primary
    else:
        ga_cfg = GaConfig(
            population_size=args.population_size,
            generations=args.generations,
            max_rules=args.max_rules,
            seed=args.seed,
        )
        partition = fit_partition(train_ds)
        rb = fit_fuzzy(train_ds, partition, ga_cfg)
        adapter = ModelAdapter.for_fuzzy(rb, imputation_values(train_ds))
    scheme = fit_discretization(train_ds, bins=args.bins)
    ec = EmpiricalConditional.fit(train_ds, scheme, alpha=args.alpha)
    policy = _policy_from(args)

    if args.estimator:
        net = make_net(train_ds, TrainConfig(epochs=args.epochs, seed=args.seed))
        batch = build_targets(
            train_ds, adapter, ec, masks_per_sample=args.masks_per_sample, seed=args.seed
        )
        train(net, batch)
        adapter = replace(adapter, value_net=net)
        policy = replace(policy, value_source="estimator")

    doc = bundle_mod.bundle_dict(
        dataset_meta={
            "source": args.data,
            "label_column": label,
            "feature_names": list(ds.feature_names),
            "class_names": list(ds.class_names),
            "categorical": list(ds.categorical),
            "n_samples": ds.n_samples,
            "feature_ranges": [
                [float(ds.samples[:, j].min()), float(ds.samples[:, j].max())]
                for j in range(ds.n_features)
            ],
        },
        split={
            "seed": args.seed,
            "test_fraction": args.test_fraction,
            "train_indices": tr_idx,
            "test_indices": te_idx,
        },
        kind=args.model,
        adapter=adapter,
        ec=ec,
        policy=policy,
        cart_config=cart_cfg,
        ga_config=ga_cfg,
        seed=args.seed,
    )
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    bundle_mod.write_bundle(args.out, doc)
    rules_path = os.path.join(out_dir, "rules.txt")
    with open(rules_path, "w", encoding="utf-8") as fh:
        fh.write(render_rule_base(rb) + "\n")
    print(f"wrote {args.out} and {rules_path}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    if not os.path.isfile(args.bundle):
        print(f"file not found: {args.bundle}", file=sys.stderr)
        return EXIT_DATA
    try:
        loaded = bundle_mod.read_bundle(args.bundle)
    except bundle_mod.BundleError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    data_path = args.data or loaded.dataset_meta.get("source")
    if not data_path:
        print("data error: bundle has no source path; pass --data", file=sys.stderr)
        return EXIT_DATA
    try:
        ds, _ = _load(data_path, loaded.dataset_meta.get("label_column"))
    except FileNotFoundError as exc:
        print(f"file not found: {exc.args[0]}", file=sys.stderr)
        return EXIT_DATA
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    policy = loaded.policy
    if args.value_source is not None:
        policy = replace(policy, value_source=args.value_source)
    estimator_cfg = None
    if policy.value_source == "estimator":
        if loaded.adapter.value_net is None:
            print(
                "usage error: --value-source estimator needs a bundle trained "
                "with --estimator (no value network embedded)",
                file=sys.stderr,
            )
            return EXIT_USAGE
        estimator_cfg = loaded.adapter.value_net.config

    seed = int(loaded.doc.get("seed", 0))
    bench_cfg = BenchmarkConfig(
        policy=policy,
        cart=loaded.cart_config or CartConfig(seed=seed),
        ga=loaded.ga_config or GaConfig(seed=seed),
        bins=len(loaded.ec.scheme.edges[0]) + 1,
        alpha=loaded.ec.alpha,
        test_fraction=float(loaded.split["test_fraction"]),
        seed=seed,
        workers=args.workers,
        prune=not args.no_prune,
        estimator=estimator_cfg,
    )
    name = os.path.splitext(os.path.basename(data_path))[0]
    result = run_benchmark(ds, loaded.kind, bench_cfg, repeats=args.repeats, name=name)
    stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    run_dir = os.path.join(args.out, f"bench_{stamp}_seed{seed}")
    paths = write_benchmark(result, run_dir)
    if loaded.kind == "fuzzy":
        tr_idx, _ = stratified_split(ds, bench_cfg.test_fraction, seed=seed)
        train_ds = ds.subset(tr_idx)
        rb = fit_fuzzy(train_ds, fit_partition(train_ds), replace(bench_cfg.ga, seed=seed))
        paths += write_calibration(calibration_report(rb, train_ds), run_dir)
    row = result.summary_row
    print(
        f"{row['dataset']} {row['method']}: first-10 mean {100 * row['mean']:.2f} "
        f"+/- {100 * row['std']:.2f} over {row['repeats']} repeats (k {row['k_range']})"
    )
    print(f"run directory: {run_dir} ({len(paths)} files)")
    return EXIT_OK


def cmd_verify(args) -> int:
    failures = []

    report = verify_selection_equivalence(trials=args.trials, seed=args.seed)
    ok_equiv = report["passed"] and report["mismatches"] == 0
    print(
        f"[{'PASS' if ok_equiv else 'FAIL'}] selection equivalence: "
        f"{report['matches']}/{report['states_checked']} states matched "
        f"({report['trials']} worlds, {report['elapsed_seconds']:.2f}s)"
    )
    if not ok_equiv:
        failures.append(("selection equivalence", f"{report['mismatches']} mismatching states"))

    dev = report["max_identity_deviation"]
    ok_identity = dev < 1e-9
    print(f"[{'PASS' if ok_identity else 'FAIL'}] decomposition identity: max deviation {dev:.3e}")
    if not ok_identity:
        failures.append(("decomposition identity", f"deviation {dev:.3e} >= 1e-9"))

    labels = {"wine": "cultivar", "heart": "disease", "yeast": "site"}
    if not os.path.isdir(args.data_dir):
        print(f"data error: dataset directory not found: {args.data_dir}", file=sys.stderr)
        return EXIT_DATA

    wine_path = os.path.join(args.data_dir, "wine.csv")
    if os.path.isfile(wine_path):
        ds, _ = _load(wine_path, labels["wine"])
        tr_idx, _ = stratified_split(ds, 0.2, seed=args.seed)
        train_ds = ds.subset(tr_idx)
        rb = fit_fuzzy(train_ds, fit_partition(train_ds), GaConfig(seed=args.seed))
        rep = calibration_report(rb, train_ds)
        ok_cal = rep.max_residual < 1e-9
        print(
            f"[{'PASS' if ok_cal else 'FAIL'}] confidence recombination: "
            f"max residual {rep.max_residual:.3e} over {len(rep.rules)} rules"
        )
        if not ok_cal:
            failures.append(("confidence recombination", f"residual {rep.max_residual:.3e}"))
    else:
        print(f"data error: file not found: {wine_path}", file=sys.stderr)
        return EXIT_DATA

    mismatch_total = 0
    episode_total = 0
    for name, label in labels.items():
        path = os.path.join(args.data_dir, f"{name}.csv")
        if not os.path.isfile(path):
            print(f"data error: file not found: {path}", file=sys.stderr)
            return EXIT_DATA
        ds, _ = _load(path, label)
        mismatches, episodes = _pruning_suite(ds, seed=args.seed, cap=args.episode_cap)
        mismatch_total += mismatches
        episode_total += episodes
        if mismatches:
            failures.append((f"pruning exactness ({name})", f"{mismatches}/{episodes} episodes diverged"))
    ok_prune = mismatch_total == 0
    print(
        f"[{'PASS' if ok_prune else 'FAIL'}] pruning exactness: "
        f"{episode_total - mismatch_total}/{episode_total} episodes identical"
    )

    if failures:
        for name, detail in failures:
            print(f"verification failure: {name}: {detail}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _pruning_suite(ds, seed: int, cap: int) -> tuple[int, int]:
    """Count test episodes whose carried per-step predictions differ between
    pruned and unpruned selection (crisp trees, theta = 0)."""
    from .dfs_engine import run_episode

    tr_idx, te_idx = stratified_split(ds, 0.2, seed=seed)
    train_ds, test_ds = ds.subset(tr_idx), ds.subset(te_idx)
    ensemble = fit_ensemble(train_ds, CartConfig(min_samples_leaf=2, seed=seed))
    adapter = ModelAdapter.for_ensemble(ensemble)
    ec = EmpiricalConditional.fit(train_ds, fit_discretization(train_ds, 5), alpha=1.0)
    policy = PolicyConfig(lam=0.1, budget=10)
    n = min(cap, test_ds.n_samples)
    mismatches = 0
    for i in range(n):
        sample, label = test_ds.samples[i], int(test_ds.labels[i])
        s1 = run_episode(sample, label, adapter, ec, policy, prune=True)
        s2 = run_episode(sample, label, adapter, ec, policy, prune=False)
        if not _same_carried_predictions(s1, s2, policy.budget):
            mismatches += 1
    return mismatches, n


def _same_carried_predictions(s1, s2, budget: int) -> bool:
    p1 = [step.prediction for step in s1.trace]
    p2 = [step.prediction for step in s2.trace]
    if not p1 or not p2:
        return bool(p1) == bool(p2)
    for k in range(1, budget + 1):
        a = p1[min(k, len(p1)) - 1]
        b = p2[min(k, len(p2)) - 1]
        if not np.array_equal(a, b):
            return False
    return True


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    if not os.path.isfile(args.bundle):
        print(f"file not found: {args.bundle}", file=sys.stderr)
        return EXIT_DATA
    try:
        loaded = bundle_mod.read_bundle(args.bundle)
    except bundle_mod.BundleError as exc:
        print(f"refusing to start: invalid bundle: {exc}", file=sys.stderr)
        return EXIT_DATA
    name = os.path.splitext(os.path.basename(args.bundle))[0]
    app = create_app(
        loaded,
        bundle_name=name,
        trace_path=args.traces,
        frontend_dir=args.frontend,
    )
    import socket

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        if exc.errno in (errno.EADDRINUSE, errno.EACCES):
            print(f"port {args.port} is already in use on {args.host}", file=sys.stderr)
            return EXIT_USAGE
        raise
    finally:
        probe.close()

    print(f"service ready: bundle {name!r} on http://{args.host}:{args.port}")
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as exc:
        # uvicorn exits 3 on startup failure; 3 means verification failure
        # here, so startup problems are reported as usage errors instead.
        if exc.code not in (0, None):
            print(f"service failed to start (port {args.port} on {args.host})", file=sys.stderr)
            return EXIT_USAGE
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    handler = {
        "train": cmd_train,
        "benchmark": cmd_benchmark,
        "verify": cmd_verify,
        "serve": cmd_serve,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
