"""Shared fixtures: dataset loads and trained models are session-scoped
because fitting is the slow part of almost every test."""

import os
import warnings

import numpy as np
import pytest

from ruledfs.cart import CartConfig, fit_ensemble
from ruledfs.data import (
    Dataset,
    EmpiricalConditional,
    fit_discretization,
    imputation_values,
    load_csv,
    stratified_split,
)
from ruledfs.dfs_engine import ModelAdapter, PolicyConfig
from ruledfs.fuzzy import GaConfig, fit_fuzzy, fit_partition

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(REPO_ROOT, "datasets")

LABELS = {"wine": "cultivar", "heart": "disease", "yeast": "site"}


def dataset_path(name: str) -> str:
    return os.path.join(DATA_DIR, f"{name}.csv")


def load_named(name: str) -> Dataset:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return load_csv(dataset_path(name), LABELS[name])


@pytest.fixture(scope="session")
def wine_ds() -> Dataset:
    return load_named("wine")


@pytest.fixture(scope="session")
def heart_ds() -> Dataset:
    return load_named("heart")


@pytest.fixture(scope="session")
def yeast_ds() -> Dataset:
    return load_named("yeast")


@pytest.fixture(scope="session")
def wine_split(wine_ds):
    tr, te = stratified_split(wine_ds, 0.2, seed=0)
    return wine_ds.subset(tr), wine_ds.subset(te)


@pytest.fixture(scope="session")
def wine_cart(wine_split):
    train, _ = wine_split
    return fit_ensemble(train, CartConfig(seed=0))


@pytest.fixture(scope="session")
def wine_cart_adapter(wine_cart):
    return ModelAdapter.for_ensemble(wine_cart)


@pytest.fixture(scope="session")
def wine_fuzzy(wine_split):
    train, _ = wine_split
    return fit_fuzzy(train, fit_partition(train), GaConfig(seed=0))


@pytest.fixture(scope="session")
def wine_fuzzy_adapter(wine_fuzzy, wine_split):
    train, _ = wine_split
    return ModelAdapter.for_fuzzy(wine_fuzzy, imputation_values(train))


@pytest.fixture(scope="session")
def wine_ec(wine_split):
    train, _ = wine_split
    return EmpiricalConditional.fit(train, fit_discretization(train, 5), alpha=1.0)


@pytest.fixture
def default_policy():
    return PolicyConfig(lam=0.1, budget=10)


def tiny_dataset() -> Dataset:
    """Two clean classes split by either feature; feature 1 is redundant
    noise scaled differently so imputation means are distinguishable."""
    samples = np.array(
        [
            [0.0, 10.0],
            [1.0, 11.0],
            [2.0, 12.0],
            [3.0, 13.0],
            [4.0, 20.0],
            [5.0, 21.0],
            [6.0, 22.0],
            [7.0, 23.0],
        ]
    )
    labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    return Dataset(
        samples=samples,
        labels=labels,
        feature_names=("left", "right"),
        class_names=("lo", "hi"),
    )


@pytest.fixture
def tiny_ds() -> Dataset:
    return tiny_dataset()
