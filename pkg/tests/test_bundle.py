"""Bundle serialization: canonical JSON, roundtrips, tamper rejection."""

import json
import math
from dataclasses import replace

import numpy as np
import pytest

from ruledfs.bundle import (
    FORMAT,
    BundleError,
    bundle_dict,
    dumps,
    from_doc,
    read_bundle,
    write_bundle,
)
from ruledfs.data import PartialObservation, stratified_split
from ruledfs.dfs_engine import PolicyConfig, run_episode
from ruledfs.estimator import TrainConfig, make_net
from ruledfs.fuzzy import GaConfig


def split_dict(ds, seed=0, test_fraction=0.2):
    tr, te = stratified_split(ds, test_fraction, seed=seed)
    return {
        "seed": seed,
        "test_fraction": test_fraction,
        "train_indices": tr,
        "test_indices": te,
    }


def meta_dict(ds, source="wine.csv", label="cultivar"):
    return {
        "source": source,
        "label_column": label,
        "feature_names": list(ds.feature_names),
        "class_names": list(ds.class_names),
        "categorical": [bool(c) for c in ds.categorical],
        "n_samples": ds.n_samples,
    }


@pytest.fixture(scope="module")
def cart_doc(wine_ds, wine_cart, wine_cart_adapter, wine_ec):
    return bundle_dict(
        dataset_meta=meta_dict(wine_ds),
        split=split_dict(wine_ds),
        kind="cart",
        adapter=wine_cart_adapter,
        ec=wine_ec,
        policy=PolicyConfig(lam=0.1, budget=10),
        cart_config=wine_cart.config,
        seed=0,
    )


@pytest.fixture(scope="module")
def fuzzy_doc(wine_ds, wine_fuzzy_adapter, wine_ec):
    return bundle_dict(
        dataset_meta=meta_dict(wine_ds),
        split=split_dict(wine_ds),
        kind="fuzzy",
        adapter=wine_fuzzy_adapter,
        ec=wine_ec,
        policy=PolicyConfig(lam=0.1, budget=10),
        ga_config=GaConfig(seed=0),
        seed=0,
    )


class TestCanonicalForm:
    def test_single_line_sorted(self, cart_doc):
        text = dumps(cart_doc)
        assert text.endswith("\n")
        assert text.count("\n") == 1
        # Canonical form reserializes to itself.
        assert dumps(json.loads(text)) == text

    def test_no_nan_tokens(self, cart_doc, fuzzy_doc):
        for doc in (cart_doc, fuzzy_doc):
            text = dumps(doc)
            assert "NaN" not in text
            assert "Infinity" not in text

    def test_infinite_bounds_travel_as_null(self, cart_doc):
        # Tree rules condition every feature from the root, so the first
        # split's sibling bounds are infinite and must serialize as null.
        conds = [
            c
            for r in cart_doc["model"]["primary"]["rules"]
            for c in r["conditions"]
        ]
        assert any(c["lo"] is None or c["hi"] is None for c in conds)
        loaded = from_doc(json.loads(dumps(cart_doc)))
        bounds = [
            (c.lo, c.hi)
            for r in loaded.adapter.rule_base.rules
            for c in r.conditions
        ]
        assert any(math.isinf(lo) or math.isinf(hi) for lo, hi in bounds)

    def test_nan_rejected_at_assembly(self, wine_ds, wine_cart, wine_ec):
        imput = wine_cart.imputation.copy()
        imput[0] = np.nan
        ensemble = replace(wine_cart, imputation=imput)
        from ruledfs.dfs_engine import ModelAdapter

        adapter = ModelAdapter.for_ensemble(ensemble)
        with pytest.raises(BundleError, match="NaN"):
            bundle_dict(
                dataset_meta=meta_dict(wine_ds),
                split=split_dict(wine_ds),
                kind="cart",
                adapter=adapter,
                ec=wine_ec,
                policy=PolicyConfig(),
                cart_config=wine_cart.config,
            )

    def test_unknown_kind_rejected(self, wine_ds, wine_cart_adapter, wine_ec):
        with pytest.raises(BundleError, match="unknown model kind"):
            bundle_dict(
                dataset_meta=meta_dict(wine_ds),
                split=split_dict(wine_ds),
                kind="nearest",
                adapter=wine_cart_adapter,
                ec=wine_ec,
                policy=PolicyConfig(),
            )


class TestRoundtrip:
    def test_cart_bytes_stable(self, cart_doc, wine_ds, wine_ec):
        loaded = from_doc(json.loads(dumps(cart_doc)))
        rebuilt = bundle_dict(
            dataset_meta=loaded.dataset_meta,
            split=loaded.split,
            kind=loaded.kind,
            adapter=loaded.adapter,
            ec=loaded.ec,
            policy=loaded.policy,
            cart_config=loaded.cart_config,
            seed=loaded.doc["seed"],
        )
        assert dumps(rebuilt) == dumps(cart_doc)

    def test_fuzzy_bytes_stable(self, fuzzy_doc):
        loaded = from_doc(json.loads(dumps(fuzzy_doc)))
        rebuilt = bundle_dict(
            dataset_meta=loaded.dataset_meta,
            split=loaded.split,
            kind=loaded.kind,
            adapter=loaded.adapter,
            ec=loaded.ec,
            policy=loaded.policy,
            ga_config=loaded.ga_config,
            seed=loaded.doc["seed"],
        )
        assert dumps(rebuilt) == dumps(fuzzy_doc)

    def test_fuzzy_partition_restored(self, fuzzy_doc, wine_fuzzy):
        loaded = from_doc(json.loads(dumps(fuzzy_doc)))
        rb = loaded.adapter.rule_base
        assert rb.partition is not None
        assert len(rb.partition) == len(wine_fuzzy.partition)
        for row, orig_row in zip(rb.partition, wine_fuzzy.partition):
            for mf, orig in zip(row, orig_row):
                assert (mf.l, mf.m1, mf.m2, mf.r) == (orig.l, orig.m1, orig.m2, orig.r)

    def test_loaded_model_replays_episodes(
        self, cart_doc, wine_ds, wine_cart_adapter, wine_ec
    ):
        loaded = from_doc(json.loads(dumps(cart_doc)))
        policy = loaded.policy
        te = np.asarray(loaded.split["test_indices"])[:5]
        for i in te:
            sample, label = wine_ds.samples[i], int(wine_ds.labels[i])
            s1 = run_episode(sample, label, wine_cart_adapter, wine_ec, policy)
            s2 = run_episode(sample, label, loaded.adapter, loaded.ec, policy)
            assert len(s1.trace) == len(s2.trace)
            for a, b in zip(s1.trace, s2.trace):
                assert a.feature == b.feature
                assert a.value == b.value
                np.testing.assert_array_equal(a.prediction, b.prediction)
                assert a.u == b.u and a.e == b.e

    def test_estimator_weights_roundtrip(self, wine_ds, wine_split, wine_cart, wine_ec):
        from ruledfs.dfs_engine import ModelAdapter

        train, _ = wine_split
        net = make_net(train, TrainConfig(epochs=1, seed=7))
        adapter = ModelAdapter.for_ensemble(wine_cart, value_net=net)
        doc = bundle_dict(
            dataset_meta=meta_dict(wine_ds),
            split=split_dict(wine_ds),
            kind="cart",
            adapter=adapter,
            ec=wine_ec,
            policy=PolicyConfig(value_source="estimator"),
            cart_config=wine_cart.config,
        )
        loaded = from_doc(json.loads(dumps(doc)))
        assert loaded.adapter.value_net is not None
        obs = PartialObservation.empty(wine_ds.n_features).with_feature(
            3, float(train.samples[0, 3])
        )
        sub = adapter.predict_partial(obs)
        u1, e1 = net.predict_values(obs, sub)
        u2, e2 = loaded.adapter.value_net.predict_values(obs, sub)
        np.testing.assert_array_equal(u1, u2)
        np.testing.assert_array_equal(e1, e2)


class TestFileIo:
    def test_write_then_read(self, cart_doc, tmp_path):
        path = str(tmp_path / "model.bundle.json")
        write_bundle(path, cart_doc)
        loaded = read_bundle(path)
        assert dumps(loaded.doc) == open(path, encoding="utf-8").read()
        assert loaded.kind == "cart"

    def test_invalid_json(self, tmp_path):
        path = str(tmp_path / "broken.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("{not json")
        with pytest.raises(BundleError, match="not valid JSON"):
            read_bundle(path)


class TestRejection:
    def test_wrong_format(self):
        with pytest.raises(BundleError, match=FORMAT):
            from_doc({"format": "other/9"})

    def test_non_dict(self):
        with pytest.raises(BundleError, match=FORMAT):
            from_doc([1, 2, 3])

    def test_missing_section(self, cart_doc):
        for key in ("dataset", "split", "model", "conditional", "imputation", "policy"):
            doc = json.loads(dumps(cart_doc))
            del doc[key]
            with pytest.raises(BundleError, match=f"missing the '{key}'"):
                from_doc(doc)

    def test_type_tamper(self, cart_doc):
        doc = json.loads(dumps(cart_doc))
        doc["model"]["primary"]["rules"] = 17
        with pytest.raises(BundleError, match="malformed bundle"):
            from_doc(doc)

    def test_unknown_model_kind(self, cart_doc):
        doc = json.loads(dumps(cart_doc))
        doc["model"]["kind"] = "nearest"
        with pytest.raises(BundleError, match="unknown model kind"):
            from_doc(doc)

    def test_cart_without_cart_config(self, cart_doc):
        doc = json.loads(dumps(cart_doc))
        doc["model"]["cart_config"] = None
        with pytest.raises(BundleError, match="cart_config"):
            from_doc(doc)

    def test_imputation_width_tamper(self, cart_doc):
        doc = json.loads(dumps(cart_doc))
        doc["imputation"] = doc["imputation"][:-1]
        with pytest.raises(BundleError, match="imputation width|malformed"):
            from_doc(doc)

    def test_conditional_width_tamper(self, cart_doc):
        doc = json.loads(dumps(cart_doc))
        doc["conditional"]["train_bins"] = [
            row[:-1] for row in doc["conditional"]["train_bins"]
        ]
        with pytest.raises(BundleError, match="conditional table width|malformed"):
            from_doc(doc)
