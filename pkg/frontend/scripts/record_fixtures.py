#!/usr/bin/env python3
"""Record service responses as JSON fixtures for the frontend test suite.

Trains a small fuzzy bundle on the wine dataset (deterministic: seed 0),
drives the HTTP service in-process, and captures the exact response bodies
for one full suggestion-following episode (create, three observes, halt),
one override episode, and the error shapes the UI must render. Session ids
and timestamps are normalized so re-recording produces stable diffs.

Run from the repository root:

    python3 frontend/scripts/record_fixtures.py
"""

import json
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[2]
FIXTURES_DIR = Path(__file__).resolve().parents[1] / "tests" / "fixtures"
DATA_CSV = REPO_ROOT / "datasets" / "wine.csv"

sys.path.insert(0, str(REPO_ROOT / "src"))

from fastapi.testclient import TestClient  # noqa: E402

from ruledfs import cli  # noqa: E402
from ruledfs.bundle import from_doc  # noqa: E402
from ruledfs.service import create_app  # noqa: E402

BUDGET = 3
LAM = 0.1
# Seed 1's evolved rule base yields suggestion-following episodes whose
# per-step aleatoric u strictly decreases, which the timeline test relies on.
SEED = 1

FIXED_CREATED = "2026-01-01T00:00:00+00:00"
SID_MAIN = "fixture-session-main"
SID_OVERRIDE = "fixture-session-override"


def train_bundle(out_path: Path) -> None:
    code = cli.main(
        [
            "train",
            "--data",
            str(DATA_CSV),
            "--out",
            str(out_path),
            "--model",
            "fuzzy",
            "--seed",
            str(SEED),
            "--budget",
            str(BUDGET),
            "--lam",
            str(LAM),
        ]
    )
    if code != 0:
        raise SystemExit(f"train failed with exit code {code}")


def follow_suggestions(client: TestClient, sample: list[float]) -> dict | None:
    """Create a session and follow the suggested feature BUDGET times.

    Returns the recorded request/response trail when the episode used a
    suggestion at every step, halted exactly on the last observe, and the
    per-step aleatoric u strictly decreased; None otherwise.
    """
    create = client.post("/sessions", json={"lambda": LAM, "budget": BUDGET})
    if create.status_code != 201:
        raise SystemExit(f"create failed: {create.status_code} {create.text}")
    body = create.json()
    sid = body["session_id"]
    trail = {"create": body, "observes": []}
    try:
        state = body["state"]
        for step_no in range(BUDGET):
            suggestion = state["suggestion"]
            if state["status"] != "active" or suggestion is None:
                return None
            feat = suggestion["feature"]
            resp = client.post(
                f"/sessions/{sid}/observe",
                json={"feature": feat, "value": sample[feat]},
            )
            if resp.status_code != 200:
                return None
            payload = resp.json()
            trail["observes"].append(payload)
            state = payload["state"]
        if state["status"] != "halted":
            return None
        u_values = [obs["step"]["u"] for obs in trail["observes"]]
        if not all(a > b for a, b in zip(u_values, u_values[1:])):
            return None
        trail["halted_state"] = state
        trail["sid"] = sid
        return trail
    finally:
        if trail.get("sid") is None:
            client.delete(f"/sessions/{sid}")


def normalize(value, sid_map: dict[str, str]):
    if isinstance(value, dict):
        out = {}
        for key, val in value.items():
            if key == "session_id" and isinstance(val, str):
                out[key] = sid_map.get(val, val)
            elif key in ("created", "updated") and isinstance(val, str):
                out[key] = FIXED_CREATED
            else:
                out[key] = normalize(val, sid_map)
        return out
    if isinstance(value, list):
        return [normalize(v, sid_map) for v in value]
    return value


def write_fixture(name: str, payload) -> None:
    path = FIXTURES_DIR / name
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path.relative_to(REPO_ROOT)}")


def main() -> int:
    FIXTURES_DIR.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        bundle_path = Path(tmp) / "wine-fuzzy.json"
        train_bundle(bundle_path)
        with open(bundle_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        bundle = from_doc(doc)
        app = create_app(bundle, bundle_name="wine-fuzzy")
        client = TestClient(app)

        ds, _label = cli._load(str(DATA_CSV), None)
        test_idx = doc["split"]["test_indices"]

        chosen = None
        chosen_row = None
        for idx in test_idx:
            sample = [float(v) for v in ds.samples[idx]]
            trail = follow_suggestions(client, sample)
            if trail is not None:
                chosen = trail
                chosen_row = idx
                break
        if chosen is None:
            raise SystemExit(
                "no test row produced a full suggestion-following episode "
                "with strictly decreasing u; adjust the bundle configuration"
            )

        sid_main = chosen["sid"]
        sample = [float(v) for v in ds.samples[chosen_row]]

        # Error shape: observing after the session halted.
        observed_feats = {st["step"]["feature"] for st in chosen["observes"]}
        spare = next(i for i in range(ds.n_features) if i not in observed_feats)
        halted_err = client.post(
            f"/sessions/{sid_main}/observe", json={"feature": spare, "value": sample[spare]}
        )
        assert halted_err.status_code == 409, halted_err.text

        # Override episode: same config, but the user ignores the suggestion
        # and observes the worst-ranked candidate instead.
        over_create = client.post("/sessions", json={"lambda": LAM, "budget": BUDGET})
        assert over_create.status_code == 201
        over_body = over_create.json()
        sid_over = over_body["session_id"]
        rows = sorted(over_body["state"]["candidates"], key=lambda r: (r["q"], r["feature"]))
        suggested = over_body["initial_suggestion"]["feature"]
        override_feat = rows[-1]["feature"]
        assert override_feat != suggested, "need a non-suggested candidate to override with"
        over_obs = client.post(
            f"/sessions/{sid_over}/observe",
            json={"feature": override_feat, "value": sample[override_feat]},
        )
        assert over_obs.status_code == 200, over_obs.text

        # Error shape: repeating an already-observed feature.
        repeat_err = client.post(
            f"/sessions/{sid_over}/observe",
            json={"feature": override_feat, "value": sample[override_feat]},
        )
        assert repeat_err.status_code == 409, repeat_err.text

        # Error shape: feature index outside the schema.
        range_err = client.post(
            f"/sessions/{sid_over}/observe", json={"feature": 99, "value": 1.0}
        )
        assert range_err.status_code == 422, range_err.text

        sid_map = {sid_main: SID_MAIN, sid_over: SID_OVERRIDE}
        write_fixture("create.json", normalize(chosen["create"], sid_map))
        for i, payload in enumerate(chosen["observes"], start=1):
            write_fixture(f"observe{i}.json", normalize(payload, sid_map))
        write_fixture(
            "err_409_halted.json",
            {"status": halted_err.status_code, "body": halted_err.json()},
        )
        write_fixture("override_create.json", normalize(over_body, sid_map))
        write_fixture("override_observe.json", normalize(over_obs.json(), sid_map))
        write_fixture(
            "err_409_repeat.json",
            {"status": repeat_err.status_code, "body": repeat_err.json()},
        )
        write_fixture(
            "err_422_feature.json",
            {"status": range_err.status_code, "body": range_err.json()},
        )

        u_values = [st["step"]["u"] for st in chosen["observes"]]
        write_fixture(
            "meta.json",
            {
                "dataset": "wine",
                "model": "fuzzy",
                "seed": SEED,
                "lambda": LAM,
                "budget": BUDGET,
                "sample_row": int(chosen_row),
                "followed_features": sorted(observed_feats),
                "u_trace": u_values,
                "u_strictly_decreasing": True,
                "override_feature": int(override_feat),
                "suggested_at_override": int(suggested),
                "note": (
                    "session ids and timestamps are normalized; every other value "
                    "is byte-for-byte what the service returned"
                ),
            },
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
