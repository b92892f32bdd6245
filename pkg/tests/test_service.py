"""HTTP acquisition service: status codes, payload shapes, determinism."""

import json
import os

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import REPO_ROOT
from ruledfs.bundle import bundle_dict, dumps, from_doc
from ruledfs.data import stratified_split
from ruledfs.dfs_engine import REFERENCE_NOTE, PolicyConfig
from ruledfs.service import create_app


@pytest.fixture(scope="module")
def loaded_wine(wine_ds, wine_cart, wine_cart_adapter, wine_ec):
    tr, te = stratified_split(wine_ds, 0.2, seed=0)
    doc = bundle_dict(
        dataset_meta={
            "source": "wine.csv",
            "label_column": "cultivar",
            "feature_names": list(wine_ds.feature_names),
            "class_names": list(wine_ds.class_names),
            "categorical": [bool(c) for c in wine_ds.categorical],
            "n_samples": wine_ds.n_samples,
            "feature_ranges": [
                [float(wine_ds.samples[:, j].min()), float(wine_ds.samples[:, j].max())]
                for j in range(wine_ds.n_features)
            ],
        },
        split={
            "seed": 0,
            "test_fraction": 0.2,
            "train_indices": tr,
            "test_indices": te,
        },
        kind="cart",
        adapter=wine_cart_adapter,
        ec=wine_ec,
        policy=PolicyConfig(lam=0.1, budget=3),
        cart_config=wine_cart.config,
    )
    return from_doc(json.loads(dumps(doc)))


@pytest.fixture(scope="module")
def client(loaded_wine):
    return TestClient(create_app(loaded_wine, bundle_name="wine"))


@pytest.fixture
def empty_client():
    return TestClient(create_app(None))


def create_session(client, **body):
    r = client.post("/sessions", json=body) if body else client.post("/sessions")
    assert r.status_code == 201, r.text
    return r.json()


class TestHealth:
    def test_without_bundle(self, empty_client):
        r = empty_client.get("/health")
        assert r.status_code == 200
        assert r.json() == {"status": "ok", "bundle": None, "sessions": 0}

    def test_with_bundle(self, client):
        before = client.get("/health").json()
        assert before["status"] == "ok"
        assert before["bundle"] == "wine"
        sid = create_session(client)["session_id"]
        after = client.get("/health").json()
        assert after["sessions"] == before["sessions"] + 1
        client.delete(f"/sessions/{sid}")


class TestCreateSession:
    def test_no_bundle_is_503(self, empty_client):
        r = empty_client.post("/sessions")
        assert r.status_code == 503
        assert "no model bundle" in r.json()["error"]

    def test_created_payload(self, client, loaded_wine):
        body = create_session(client)
        assert body["feature_names"] == list(loaded_wine.feature_names)
        assert body["class_names"] == list(loaded_wine.class_names)
        assert body["budget"] == 3
        assert body["lambda"] == 0.1
        sug = body["initial_suggestion"]
        assert sug is not None
        assert set(sug) == {"feature", "feature_name", "expected_u", "expected_e", "q"}
        feats = body["features"]
        assert [f["name"] for f in feats] == list(loaded_wine.feature_names)
        expected_ranges = loaded_wine.dataset_meta["feature_ranges"]
        for i, f in enumerate(feats):
            assert f["feature"] == i
            assert f["categorical"] is False
            assert [f["min"], f["max"]] == expected_ranges[i]
            assert f["min"] < f["max"]
        state = body["state"]
        assert state["status"] == "active"
        assert state["observed"] == []
        assert state["trace"] == []
        assert state["prediction"]["annotation"] == REFERENCE_NOTE

    def test_ranges_absent_in_old_bundles(self, loaded_wine):
        # bundles written before range recording load fine; hints are null
        doc = json.loads(dumps(loaded_wine.doc))
        del doc["dataset"]["feature_ranges"]
        local = TestClient(create_app(from_doc(doc), bundle_name="wine"))
        feats = create_session(local)["features"]
        assert all(f["min"] is None and f["max"] is None for f in feats)

    def test_policy_overrides(self, client):
        body = create_session(client, **{"lambda": 0.5, "budget": 2})
        assert body["lambda"] == 0.5
        assert body["budget"] == 2

    def test_matching_bundle_name(self, client):
        assert create_session(client, bundle="wine")["session_id"]

    def test_unknown_bundle_name(self, client):
        r = client.post("/sessions", json={"bundle": "heart"})
        assert r.status_code == 400
        assert r.json()["field"] == "bundle"

    def test_invalid_json(self, client):
        r = client.post(
            "/sessions", content=b"{oops", headers={"content-type": "application/json"}
        )
        assert r.status_code == 400
        assert "not valid JSON" in r.json()["error"]

    def test_non_object_body(self, client):
        r = client.post("/sessions", json=[1, 2])
        assert r.status_code == 400
        assert "JSON object" in r.json()["error"]

    def test_unknown_field(self, client):
        r = client.post("/sessions", json={"budgets": 3})
        assert r.status_code == 400
        assert r.json()["field"] == "budgets"

    @pytest.mark.parametrize("lam", [-0.5, True, "0.1"])
    def test_bad_lambda(self, client, lam):
        r = client.post("/sessions", json={"lambda": lam})
        assert r.status_code == 400
        assert r.json()["field"] == "lambda"

    @pytest.mark.parametrize("budget", [0, -3, 2.5, True, "4"])
    def test_bad_budget(self, client, budget):
        r = client.post("/sessions", json={"budget": budget})
        assert r.status_code == 400
        assert r.json()["field"] == "budget"


class TestObserve:
    def test_unknown_session(self, client):
        r = client.post("/sessions/feed1234/observe", json={"feature": 0, "value": 1.0})
        assert r.status_code == 404

    def test_missing_fields(self, client):
        sid = create_session(client)["session_id"]
        r = client.post(f"/sessions/{sid}/observe", json={"value": 1.0})
        assert r.status_code == 400 and r.json()["field"] == "feature"
        r = client.post(f"/sessions/{sid}/observe", json={"feature": 0})
        assert r.status_code == 400 and r.json()["field"] == "value"

    def test_non_integer_feature(self, client):
        sid = create_session(client)["session_id"]
        r = client.post(f"/sessions/{sid}/observe", json={"feature": "3", "value": 1.0})
        assert r.status_code == 400 and r.json()["field"] == "feature"

    @pytest.mark.parametrize("feature", [-1, 13, 999])
    def test_feature_out_of_range(self, client, feature):
        sid = create_session(client)["session_id"]
        r = client.post(f"/sessions/{sid}/observe", json={"feature": feature, "value": 1.0})
        assert r.status_code == 422 and r.json()["field"] == "feature"

    def test_non_finite_value(self, client):
        sid = create_session(client)["session_id"]
        r = client.post(
            f"/sessions/{sid}/observe",
            content=b'{"feature": 0, "value": NaN}',
            headers={"content-type": "application/json"},
        )
        assert r.status_code == 422 and r.json()["field"] == "value"
        r = client.post(f"/sessions/{sid}/observe", json={"feature": 0, "value": "big"})
        assert r.status_code == 422 and r.json()["field"] == "value"

    def test_follow_suggestion(self, client, wine_ds):
        body = create_session(client)
        sid = body["session_id"]
        feat = body["initial_suggestion"]["feature"]
        value = float(wine_ds.samples[0, feat])
        r = client.post(f"/sessions/{sid}/observe", json={"feature": feat, "value": value})
        assert r.status_code == 200
        out = r.json()
        assert set(out) == {"step", "suggestion", "state"}
        step = out["step"]
        assert step["feature"] == feat
        assert step["value"] == value
        assert set(step) >= {"feature", "value", "prediction", "u", "e"}
        state = out["state"]
        assert [o["feature"] for o in state["observed"]] == [feat]
        assert len(state["trace"]) == 1
        assert out["suggestion"]["feature"] != feat

    def test_override_suggestion(self, client, wine_ds):
        body = create_session(client)
        sid = body["session_id"]
        suggested = body["initial_suggestion"]["feature"]
        chosen = (suggested + 1) % len(body["feature_names"])
        value = float(wine_ds.samples[0, chosen])
        r = client.post(f"/sessions/{sid}/observe", json={"feature": chosen, "value": value})
        assert r.status_code == 200
        assert r.json()["step"]["feature"] == chosen

    def test_double_observe_conflicts(self, client, wine_ds):
        sid = create_session(client)["session_id"]
        payload = {"feature": 2, "value": float(wine_ds.samples[0, 2])}
        assert client.post(f"/sessions/{sid}/observe", json=payload).status_code == 200
        r = client.post(f"/sessions/{sid}/observe", json=payload)
        assert r.status_code == 409
        assert "already observed" in r.json()["error"]

    def test_halted_session_conflicts_with_reason(self, client, wine_ds):
        sid = create_session(client, budget=2)["session_id"]
        for feat in (0, 1):
            r = client.post(
                f"/sessions/{sid}/observe",
                json={"feature": feat, "value": float(wine_ds.samples[0, feat])},
            )
            assert r.status_code == 200
        assert r.json()["state"]["status"] == "halted"
        assert r.json()["state"]["halt_reason"] == "budget reached"
        r = client.post(f"/sessions/{sid}/observe", json={"feature": 5, "value": 1.0})
        assert r.status_code == 409
        assert "budget reached" in r.json()["error"]

    def test_candidate_q_identity(self, client):
        body = create_session(client, **{"lambda": 0.3})
        for row in body["state"]["candidates"]:
            assert row["q"] == row["expected_u"] + 0.3 * row["expected_e"]


class TestStateAndExplanation:
    def test_unknown_session(self, client):
        assert client.get("/sessions/feed1234").status_code == 404
        assert client.get("/sessions/feed1234/explanation").status_code == 404

    def test_state_roundtrip(self, client, wine_ds):
        body = create_session(client)
        sid = body["session_id"]
        feat = body["initial_suggestion"]["feature"]
        observed = client.post(
            f"/sessions/{sid}/observe",
            json={"feature": feat, "value": float(wine_ds.samples[0, feat])},
        ).json()["state"]
        fetched = client.get(f"/sessions/{sid}").json()
        for key in ("observed", "trace", "prediction", "suggestion", "candidates"):
            assert fetched[key] == observed[key]

    def test_replay_is_deterministic(self, client, wine_ds):
        # Two sessions fed identical observations agree on everything
        # except identity and timestamps.
        states = []
        for _ in range(2):
            sid = create_session(client)["session_id"]
            for feat in (3, 7):
                r = client.post(
                    f"/sessions/{sid}/observe",
                    json={"feature": feat, "value": float(wine_ds.samples[4, feat])},
                )
                assert r.status_code == 200
            states.append(client.get(f"/sessions/{sid}").json())
        a, b = states
        for key in ("status", "observed", "trace", "prediction", "suggestion", "candidates"):
            assert a[key] == b[key]

    def test_explanation_payload(self, client, wine_ds, loaded_wine):
        body = create_session(client)
        sid = body["session_id"]
        feat = body["initial_suggestion"]["feature"]
        client.post(
            f"/sessions/{sid}/observe",
            json={"feature": feat, "value": float(wine_ds.samples[0, feat])},
        )
        r = client.get(f"/sessions/{sid}/explanation")
        assert r.status_code == 200
        out = r.json()
        assert out["session_id"] == sid
        assert out["annotation"] == REFERENCE_NOTE
        assert out["trace_length"] == 1
        assert isinstance(out["winner_rule"], str) and out["winner_rule"]
        assert len(out["confidence"]) == len(loaded_wine.class_names)
        assert 0.0 <= out["support"] <= 1.0
        assert out["candidates"] == client.get(f"/sessions/{sid}").json()["candidates"]


class TestDelete:
    def test_delete_then_404(self, client):
        sid = create_session(client)["session_id"]
        r = client.delete(f"/sessions/{sid}")
        assert r.status_code == 204
        assert client.get(f"/sessions/{sid}").status_code == 404
        assert client.delete(f"/sessions/{sid}").status_code == 404


class TestTracePersistence:
    def test_halt_appends_one_line(self, loaded_wine, wine_ds, tmp_path):
        trace_path = str(tmp_path / "traces.jsonl")
        local = TestClient(
            create_app(loaded_wine, bundle_name="wine", trace_path=trace_path)
        )
        sid = create_session(local, budget=2)["session_id"]
        for feat in (0, 1):
            local.post(
                f"/sessions/{sid}/observe",
                json={"feature": feat, "value": float(wine_ds.samples[0, feat])},
            )
        assert os.path.isfile(trace_path)
        lines = open(trace_path, encoding="utf-8").read().splitlines()
        assert len(lines) == 1
        record = json.loads(lines[0])
        assert record["session_id"] == sid
        assert record["status"] == "halted"
        assert record["halt_reason"] == "budget reached"
        assert len(record["trace"]) == 2

    def test_active_session_not_persisted(self, loaded_wine, wine_ds, tmp_path):
        trace_path = str(tmp_path / "traces.jsonl")
        local = TestClient(
            create_app(loaded_wine, bundle_name="wine", trace_path=trace_path)
        )
        sid = create_session(local)["session_id"]
        local.post(
            f"/sessions/{sid}/observe",
            json={"feature": 0, "value": float(wine_ds.samples[0, 0])},
        )
        assert not os.path.exists(trace_path)


class TestOpenApiDocument:
    def test_checked_in_schema_is_current(self):
        path = os.path.join(REPO_ROOT, "docs", "openapi.json")
        with open(path, encoding="utf-8") as fh:
            on_disk = json.load(fh)
        assert create_app(None).openapi() == on_disk
