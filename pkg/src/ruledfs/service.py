"""HTTP session service for interactive feature acquisition.

One process serves one loaded model bundle. A session owns an episode: the
client observes feature values one at a time (following or overriding the
engine's suggestion) and reads back the prediction, per-candidate quality
table, and rule-level explanation after every step.

Interactive sessions have no ground-truth sample, so the aleatoric
reference is the model's prediction on the mean-imputed completion of the
current observation, recomputed per step; every payload carrying it is
annotated accordingly. Sessions live in memory; a finished episode's trace
can be appended to a JSON-lines file. Request bodies are validated by
hand so malformed input yields 400 with field-level messages rather than
a framework-shaped error.
"""

from __future__ import annotations

import json
import math
import os
import threading
import uuid
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .bundle import LoadedBundle
from .dfs_engine import (
    REFERENCE_NOTE,
    STATUS_ACTIVE,
    SessionState,
    apply_observation,
    select_next,
)


class _Session:
    """One episode plus its lock; observes on the same session serialize."""

    def __init__(self, sid: str, policy, state: SessionState):
        self.id = sid
        self.policy = policy
        self.state = state
        self.lock = threading.Lock()
        self.created = _now()
        self.updated = self.created
        self.suggestion_feature: int | None = None
        self.breakdown = None

    def touch(self):
        self.updated = _now()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _error(status: int, message: str, field: str | None = None) -> JSONResponse:
    body = {"error": message}
    if field is not None:
        body["field"] = field
    return JSONResponse(body, status_code=status)


def create_app(
    bundle: LoadedBundle | None = None,
    bundle_name: str = "default",
    trace_path: str | None = None,
    frontend_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="ruledfs session service", version="1.0.0", docs_url=None, redoc_url=None)
    sessions: dict[str, _Session] = {}
    store_lock = threading.Lock()
    trace_lock = threading.Lock()

    def refresh_selection(sess: _Session) -> None:
        """Recompute the next suggestion for the session's current state;
        a halt decision is written into the state as a side effect."""
        if bundle is None:
            return
        adapter = bundle.adapter
        ref = adapter.imputed_reference(sess.state.observation)
        picked = select_next(sess.state, adapter, bundle.ec, sess.policy, ref)
        if picked is None:
            sess.suggestion_feature = None
        else:
            sess.suggestion_feature, sess.breakdown = picked

    def feature_meta() -> list[dict]:
        """Per-feature input metadata for clients: categorical flag and the
        value range seen in the training data (null when the bundle predates
        range recording)."""
        meta = bundle.dataset_meta
        cats = meta.get("categorical") or [False] * len(bundle.feature_names)
        ranges = meta.get("feature_ranges")
        rows = []
        for i, name in enumerate(bundle.feature_names):
            lo, hi = ranges[i] if ranges else (None, None)
            rows.append(
                {
                    "feature": i,
                    "name": name,
                    "categorical": bool(cats[i]),
                    "min": lo,
                    "max": hi,
                }
            )
        return rows

    def candidate_rows(sess: _Session) -> list[dict]:
        bd = sess.breakdown
        if bd is None or sess.state.status != STATUS_ACTIVE:
            return []
        rows = []
        for pos, feat in enumerate(bd.candidates):
            u = float(bd.expected_u[pos])
            e = float(bd.expected_e[pos])
            rows.append(
                {
                    "feature": int(feat),
                    "feature_name": bundle.feature_names[feat],
                    "expected_u": u,
                    "expected_e": e,
                    "q": u + sess.policy.lam * e,
                }
            )
        return rows

    def suggestion_payload(sess: _Session) -> dict | None:
        if sess.suggestion_feature is None or sess.state.status != STATUS_ACTIVE:
            return None
        feat = sess.suggestion_feature
        for row in candidate_rows(sess):
            if row["feature"] == feat:
                return row
        return None

    def prediction_payload(sess: _Session) -> dict:
        pred = bundle.adapter.predict_partial(sess.state.observation)
        winner = int(np.argmax(pred))
        return {
            "probabilities": [float(p) for p in pred],
            "classes": list(bundle.class_names),
            "winner": bundle.class_names[winner],
            "annotation": REFERENCE_NOTE,
        }

    def state_payload(sess: _Session) -> dict:
        obs = sess.state.observation
        observed = [
            {
                "feature": int(i),
                "feature_name": bundle.feature_names[i],
                "value": float(obs.values[i]),
            }
            for i in np.flatnonzero(obs.observed)
        ]
        return {
            "session_id": sess.id,
            "status": sess.state.status,
            "halt_reason": sess.state.halt_reason,
            "budget": sess.policy.budget,
            "lambda": sess.policy.lam,
            "observed": observed,
            "trace": [step.to_dict() for step in sess.state.trace],
            "prediction": prediction_payload(sess),
            "suggestion": suggestion_payload(sess),
            "candidates": candidate_rows(sess),
            "created": sess.created,
            "updated": sess.updated,
        }

    def persist_trace(sess: _Session) -> None:
        if trace_path is None:
            return
        line = json.dumps(
            {
                "session_id": sess.id,
                "status": sess.state.status,
                "halt_reason": sess.state.halt_reason,
                "trace": [step.to_dict() for step in sess.state.trace],
            },
            sort_keys=True,
        )
        with trace_lock:
            with open(trace_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    @app.get(
        "/health",
        summary="Service liveness and bundle status",
        responses={200: {"description": "status, loaded bundle name (or null), live session count"}},
    )
    def health():
        return {
            "status": "ok",
            "bundle": None if bundle is None else bundle_name,
            "sessions": len(sessions),
        }

    @app.post(
        "/sessions",
        status_code=201,
        summary="Create an acquisition session",
        description=(
            "Body (all optional): {bundle: name, lambda: number >= 0, budget: int >= 1}. "
            "Returns the session id, feature/class names, per-feature input metadata "
            "(categorical flag, seen value range), and the initial suggestion with its "
            "expected (u, e, q)."
        ),
        responses={
            201: {"description": "session created; body carries initial_suggestion and full state"},
            400: {"description": "malformed body; response names the offending field"},
            503: {"description": "no model bundle is loaded"},
        },
    )
    async def create_session(request: Request):
        if bundle is None:
            return _error(503, "no model bundle is loaded")
        raw = await request.body()
        if raw:
            try:
                data = json.loads(raw)
            except json.JSONDecodeError:
                return _error(400, "request body is not valid JSON")
            if not isinstance(data, dict):
                return _error(400, "request body must be a JSON object")
        else:
            data = {}
        allowed = {"bundle", "lambda", "budget"}
        for key in data:
            if key not in allowed:
                return _error(400, f"unknown field {key!r}", field=key)
        if "bundle" in data and data["bundle"] != bundle_name:
            return _error(400, f"unknown bundle {data['bundle']!r}", field="bundle")
        policy = bundle.policy
        if "lambda" in data:
            lam = data["lambda"]
            if not isinstance(lam, (int, float)) or isinstance(lam, bool) or not math.isfinite(lam) or lam < 0:
                return _error(400, "lambda must be a finite number >= 0", field="lambda")
            policy = replace(policy, lam=float(lam))
        if "budget" in data:
            budget = data["budget"]
            if not isinstance(budget, int) or isinstance(budget, bool) or budget < 1:
                return _error(400, "budget must be an integer >= 1", field="budget")
            policy = replace(policy, budget=budget)
        sid = uuid.uuid4().hex
        sess = _Session(
            sid, policy, SessionState.fresh(len(bundle.feature_names), policy.budget)
        )
        with sess.lock:
            refresh_selection(sess)
            if sess.state.done:
                persist_trace(sess)
            payload = {
                "session_id": sid,
                "feature_names": list(bundle.feature_names),
                "class_names": list(bundle.class_names),
                "features": feature_meta(),
                "budget": policy.budget,
                "lambda": policy.lam,
                "initial_suggestion": suggestion_payload(sess),
                "state": state_payload(sess),
            }
        with store_lock:
            sessions[sid] = sess
        return JSONResponse(payload, status_code=201)

    @app.post(
        "/sessions/{sid}/observe",
        summary="Record one observed feature value",
        description=(
            "Body: {feature: int index, value: finite number}. The feature need not be "
            "the suggested one (the human may override the policy). Returns the appended "
            "trace step, the next suggestion (or null when the episode stops), and the "
            "full session state."
        ),
        responses={
            200: {"description": "step recorded; body carries step, suggestion, state"},
            400: {"description": "malformed body; response names the offending field"},
            404: {"description": "unknown session id"},
            409: {"description": "feature already observed, or the session already halted (reason echoed)"},
            422: {"description": "feature index out of range or value not a finite number"},
        },
    )
    async def observe(sid: str, request: Request):
        sess = sessions.get(sid)
        if sess is None:
            return _error(404, f"unknown session {sid!r}")
        try:
            data = json.loads(await request.body())
        except json.JSONDecodeError:
            return _error(400, "request body is not valid JSON")
        if not isinstance(data, dict):
            return _error(400, "request body must be a JSON object")
        if "feature" not in data:
            return _error(400, "missing field 'feature'", field="feature")
        if "value" not in data:
            return _error(400, "missing field 'value'", field="value")
        feature = data["feature"]
        value = data["value"]
        if not isinstance(feature, int) or isinstance(feature, bool):
            return _error(400, "feature must be an integer index", field="feature")
        if feature < 0 or feature >= len(bundle.feature_names):
            return _error(
                422,
                f"feature index {feature} outside [0, {len(bundle.feature_names)})",
                field="feature",
            )
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
            return _error(422, "value out of representable range", field="value")
        with sess.lock:
            state = sess.state
            if state.status != STATUS_ACTIVE:
                reason = state.halt_reason or state.status
                return _error(409, f"session is no longer active: {reason}")
            if state.observation.observed[feature]:
                return _error(
                    409,
                    f"feature {bundle.feature_names[feature]!r} is already observed",
                    field="feature",
                )
            adapter = bundle.adapter
            next_obs = state.observation.with_feature(feature, float(value))
            ref = adapter.imputed_reference(next_obs)
            step = apply_observation(state, feature, float(value), sess.breakdown, adapter, ref)
            refresh_selection(sess)
            sess.touch()
            if sess.state.status != STATUS_ACTIVE:
                persist_trace(sess)
            return JSONResponse(
                {
                    "step": step.to_dict(),
                    "suggestion": suggestion_payload(sess),
                    "state": state_payload(sess),
                }
            )

    @app.get(
        "/sessions/{sid}",
        summary="Current session state",
        description=(
            "Observed values, the trace of steps, prediction with the "
            "reference annotation, current suggestion, and the per-candidate "
            "(expected_u, expected_e, q) table."
        ),
        responses={
            200: {"description": "full session state"},
            404: {"description": "unknown session id"},
        },
    )
    def get_state(sid: str):
        sess = sessions.get(sid)
        if sess is None:
            return _error(404, f"unknown session {sid!r}")
        with sess.lock:
            return JSONResponse(state_payload(sess))

    @app.get(
        "/sessions/{sid}/explanation",
        summary="Rule-level explanation of the current prediction",
        description=(
            "The winner rule rendered as text with its confidence vector and "
            "support, the per-candidate quality table, and the prediction. "
            "Mid-session predictions are annotated 'reference = imputed-global': "
            "without the true sample, the aleatoric reference is the model's "
            "prediction on the mean-imputed completion."
        ),
        responses={
            200: {"description": "explanation payload"},
            404: {"description": "unknown session id"},
        },
    )
    def explanation(sid: str):
        sess = sessions.get(sid)
        if sess is None:
            return _error(404, f"unknown session {sid!r}")
        with sess.lock:
            text, confidence, support = bundle.adapter.winner_details(sess.state.observation)
            return JSONResponse(
                {
                    "session_id": sid,
                    "winner_rule": text,
                    "confidence": [float(c) for c in confidence],
                    "support": float(support),
                    "candidates": candidate_rows(sess),
                    "prediction": prediction_payload(sess),
                    "status": sess.state.status,
                    "halt_reason": sess.state.halt_reason,
                    "trace_length": len(sess.state.trace),
                    "annotation": REFERENCE_NOTE,
                }
            )

    @app.delete(
        "/sessions/{sid}",
        status_code=204,
        summary="Discard a session",
        responses={
            204: {"description": "session removed"},
            404: {"description": "unknown session id"},
        },
    )
    def delete_session(sid: str):
        with store_lock:
            sess = sessions.pop(sid, None)
        if sess is None:
            return _error(404, f"unknown session {sid!r}")
        return Response(status_code=204)

    if frontend_dir is not None and os.path.isdir(frontend_dir):
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="frontend")

    return app
