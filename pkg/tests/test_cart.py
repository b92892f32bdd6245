"""Tree fitting, path flattening, imputation prediction, ensembles."""

import numpy as np
import pytest

from ruledfs.cart import CartConfig, fit_cart, fit_ensemble, predict_imputed
from ruledfs.data import Dataset, PartialObservation
from ruledfs.rules import memberships, predict


def ladder_dataset():
    """[DERIVED] 1-D two-class data 0..3 -> 0, 4..7 -> 1. Gini search over
    adjacent midpoints finds 3.5 (weighted impurity 0, best possible), and
    both leaves are pure with 4 samples each."""
    return Dataset(
        feature_names=("x",),
        samples=np.arange(8, dtype=float).reshape(-1, 1),
        labels=np.array([0, 0, 0, 0, 1, 1, 1, 1]),
        class_names=("lo", "hi"),
    )


class TestFitCart:
    def test_pure_split_oracle(self):
        rb = fit_cart(ladder_dataset(), CartConfig(min_samples_leaf=2))
        assert rb.n_rules == 2
        left, right = rb.rules
        assert left.conditions[0].kind == "le"
        assert left.conditions[0].hi == 3.5
        assert right.conditions[0].kind == "gt"
        assert right.conditions[0].lo == 3.5
        np.testing.assert_array_equal(left.confidence, [1.0, 0.0])
        np.testing.assert_array_equal(right.confidence, [0.0, 1.0])
        assert left.support == right.support == 0.5

    def test_min_samples_leaf_respected(self, tiny_ds):
        rb = fit_cart(tiny_ds, CartConfig(min_samples_leaf=3))
        n = tiny_ds.n_samples
        for r in rb.rules:
            assert r.support * n >= 3

    def test_max_depth_limits_conditions(self, wine_split):
        train, _ = wine_split
        rb = fit_cart(train, CartConfig(max_depth=2, min_samples_leaf=2))
        # a depth-2 tree path holds at most 2 split conditions, and merged
        # per-feature conditions can only be fewer
        assert all(len(r.conditions) <= 2 for r in rb.rules)

    def test_depth_one_is_a_stump(self, wine_split):
        train, _ = wine_split
        rb = fit_cart(train, CartConfig(max_depth=1, min_samples_leaf=2))
        assert rb.n_rules == 2

    def test_pure_root_single_rule(self):
        ds = Dataset(
            feature_names=("x",),
            samples=np.arange(6, dtype=float).reshape(-1, 1),
            labels=np.zeros(6, int),
            class_names=("only", "other"),
        )
        rb = fit_cart(ds, CartConfig())
        assert rb.n_rules == 1
        assert rb.rules[0].conditions == ()
        np.testing.assert_array_equal(rb.rules[0].confidence, [1.0, 0.0])

    def test_deterministic(self, wine_split):
        train, _ = wine_split
        a = fit_cart(train, CartConfig(seed=0))
        b = fit_cart(train, CartConfig(seed=0))
        assert len(a.rules) == len(b.rules)
        for ra, rb_ in zip(a.rules, b.rules):
            assert ra.conditions == rb_.conditions
            np.testing.assert_array_equal(ra.confidence, rb_.confidence)

    def test_rules_partition_training_space(self, wine_split):
        train, _ = wine_split
        rb = fit_cart(train, CartConfig(min_samples_leaf=2))
        mat = memberships(rb, train.samples)
        np.testing.assert_array_equal(mat.sum(axis=1), np.ones(train.n_samples))

    def test_rule_predictions_match_leaf_tallies(self, wine_split):
        # flattened rules must reproduce training-set class frequencies:
        # confidence of the fired rule times its coverage re-tallies exactly
        train, _ = wine_split
        rb = fit_cart(train, CartConfig(min_samples_leaf=2))
        mat = memberships(rb, train.samples)
        for j, r in enumerate(rb.rules):
            covered = mat[:, j] == 1.0
            n_cov = int(covered.sum())
            assert r.support == pytest.approx(n_cov / train.n_samples)
            counts = np.bincount(train.labels[covered], minlength=train.n_classes)
            np.testing.assert_allclose(r.confidence, counts / n_cov)

    def test_interval_merge_single_condition_per_feature(self, wine_split):
        train, _ = wine_split
        rb = fit_cart(train, CartConfig(max_depth=8, min_samples_leaf=2))
        for r in rb.rules:
            feats = [c.feature for c in r.conditions]
            assert len(feats) == len(set(feats))


class TestConfigValidation:
    def test_bounds(self):
        with pytest.raises(ValueError):
            CartConfig(max_depth=0)
        with pytest.raises(ValueError):
            CartConfig(min_samples_leaf=0)
        with pytest.raises(ValueError):
            CartConfig(bootstrap_count=1)


class TestEnsemble:
    def test_member_count(self, wine_cart):
        assert len(wine_cart.members) == 11   # primary + 10 auxiliaries
        assert wine_cart.members[0] is wine_cart.primary

    def test_deterministic(self, wine_split):
        train, _ = wine_split
        a = fit_ensemble(train, CartConfig(seed=3))
        b = fit_ensemble(train, CartConfig(seed=3))
        for ra, rb_ in zip(a.members, b.members):
            assert [r.conditions for r in ra.rules] == [r.conditions for r in rb_.rules]

    def test_seed_changes_auxiliaries(self, wine_split):
        train, _ = wine_split
        a = fit_ensemble(train, CartConfig(seed=0))
        b = fit_ensemble(train, CartConfig(seed=1))
        # primary ignores the seed (fit on the full data)
        assert [r.conditions for r in a.primary.rules] == [
            r.conditions for r in b.primary.rules
        ]
        assert any(
            [r.conditions for r in ra.rules] != [r.conditions for r in rb_.rules]
            for ra, rb_ in zip(a.auxiliaries, b.auxiliaries)
        )

    def test_member_confidences_rows(self, wine_cart):
        obs = PartialObservation.empty(13)
        confs = wine_cart.member_confidences(obs)
        assert confs.shape == (11, 3)
        np.testing.assert_allclose(confs.sum(axis=1), np.ones(11))

    def test_member_confidences_match_predict_imputed(self, wine_cart, wine_split):
        train, _ = wine_split
        obs = PartialObservation.empty(13).with_feature(6, float(train.samples[0, 6]))
        confs = wine_cart.member_confidences(obs)
        np.testing.assert_array_equal(confs[0], predict_imputed(wine_cart, obs, "primary"))
        for i in range(len(wine_cart.auxiliaries)):
            np.testing.assert_array_equal(confs[i + 1], predict_imputed(wine_cart, obs, i))


class TestImputedPrediction:
    def test_full_observation_passthrough(self, wine_cart, wine_split):
        train, _ = wine_split
        for i in (0, 7, 33):
            obs = PartialObservation.full(train.samples[i])
            direct = predict(wine_cart.primary, obs)
            np.testing.assert_array_equal(predict_imputed(wine_cart, obs), direct)

    def test_empty_observation_uses_means(self, wine_cart):
        obs = PartialObservation.empty(13)
        filled = wine_cart.fill(obs)
        np.testing.assert_array_equal(filled, wine_cart.imputation)
        expected = predict(wine_cart.primary, PartialObservation.full(filled))
        np.testing.assert_array_equal(predict_imputed(wine_cart, obs), expected)

    def test_observed_values_kept(self, wine_cart):
        obs = PartialObservation.empty(13).with_feature(3, 111.0)
        filled = wine_cart.fill(obs)
        assert filled[3] == 111.0
        assert filled[0] == wine_cart.imputation[0]
