"""Session-scoped HTTP JSON API for the interactive control loop.

Every response carries a schema_version field; error payloads are
{"code": ..., "message": ...}. Session state (window + revocation mask +
pending interaction) lives in memory behind a per-session lock; the loaded
scorer parameters are immutable and shared.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .config import Config, retro_request_kwargs
from .errors import ContractViolation
from .prospective import append_with_mask, prospective_explanation
from .recommend import recommend_top_k
from .records import METHOD_RELAX, METHOD_SEARCH
from .render import render_explanation
from .retrospective import RetroRequest, greedy_retrospective, relaxed_retrospective
from .scorers import ScorerParams
from .windows import MaskVector, SequenceWindow

SCHEMA_VERSION = 1


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class Session:
    session_id: str
    user_id: int
    window: SequenceWindow
    mask: MaskVector
    pending: int | None = None
    created: float = field(default_factory=time.monotonic)
    touched: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    explanation_cache: dict = field(default_factory=dict, repr=False)


class SessionStore:
    def __init__(self, ttl_seconds: float):
        self.ttl = ttl_seconds
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def _sweep(self):
        now = time.monotonic()
        dead = [sid for sid, s in self._sessions.items()
                if now - s.touched > self.ttl]
        for sid in dead:
            del self._sessions[sid]

    def create(self, user_id: int, window: SequenceWindow) -> Session:
        session = Session(
            session_id=uuid.uuid4().hex,
            user_id=user_id,
            window=window,
            mask=MaskVector.zeros(window.capacity),
        )
        with self._lock:
            self._sweep()
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            self._sweep()
            session = self._sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id}")
        session.touched = time.monotonic()
        return session

    def snapshot(self, path) -> None:
        with self._lock:
            payload = [
                {
                    "session_id": s.session_id,
                    "user_id": s.user_id,
                    "items": list(s.window.items),
                    "capacity": s.window.capacity,
                    "mask": s.mask.values.tolist(),
                    "pending": s.pending,
                }
                for s in self._sessions.values()
            ]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)

    def restore(self, path) -> int:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        count = 0
        with self._lock:
            for row in payload:
                session = Session(
                    session_id=row["session_id"],
                    user_id=row["user_id"],
                    window=SequenceWindow(tuple(row["items"]), row["capacity"]),
                    mask=MaskVector(row["mask"]),
                    pending=row["pending"],
                )
                self._sessions[session.session_id] = session
                count += 1
        return count


@dataclass
class ServiceState:
    params: ScorerParams
    user_windows: dict  # user_id -> SequenceWindow (latest history tail)
    item_names: dict
    config: Config
    store: SessionStore = None

    def __post_init__(self):
        if self.store is None:
            self.store = SessionStore(self.config.session_ttl_minutes * 60.0)

    def name_of(self, item: int) -> str:
        return self.item_names.get(item, f"Item {item}")


class CreateSessionBody(BaseModel):
    user_id: int


class RevokeBody(BaseModel):
    positions: list[int]


class InteractBody(BaseModel):
    item_id: int


def _recommendations_payload(state: ServiceState, session: Session) -> list:
    lst = recommend_top_k(
        state.params, session.window, session.mask,
        state.config.k, state.config.exclude_history,
    )
    return [
        {"rank": rank, "item_id": item, "name": state.name_of(item),
         "score": score}
        for rank, (item, score) in enumerate(lst.entries, start=1)
    ]


def _session_payload(state: ServiceState, session: Session) -> dict:
    revoked = set(session.mask.revoked_positions())
    return {
        "schema_version": SCHEMA_VERSION,
        "session_id": session.session_id,
        "user_id": session.user_id,
        "history": [
            {"position": pos, "item_id": item, "name": state.name_of(item),
             "revoked": pos in revoked}
            for pos, item in enumerate(session.window.items)
        ],
        "pending_item": session.pending,
        "recommendations": _recommendations_payload(state, session),
    }


def build_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="ctrlrec", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def api_error_handler(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message},
        )

    @app.get("/healthz")
    def healthz():
        return {
            "schema_version": SCHEMA_VERSION,
            "status": "ok",
            "model": {
                "kind": state.params.kind,
                "n_items": state.params.n_items,
                "dim": state.params.dim,
                "max_len": state.params.max_len,
            },
            "n_users": len(state.user_windows),
            "k": state.config.k,
        }

    @app.get("/items")
    def items():
        return {
            "schema_version": SCHEMA_VERSION,
            "items": [
                {"item_id": i, "name": state.name_of(i)}
                for i in range(state.params.n_items)
            ],
        }

    @app.post("/sessions")
    def create_session(body: CreateSessionBody):
        window = state.user_windows.get(body.user_id)
        if window is None:
            raise ApiError(404, "unknown_user", f"no user {body.user_id}")
        session = state.store.create(body.user_id, window)
        return _session_payload(state, session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = state.store.get(session_id)
        with session.lock:
            return _session_payload(state, session)

    @app.get("/sessions/{session_id}/recommendations")
    def get_recommendations(session_id: str):
        session = state.store.get(session_id)
        with session.lock:
            return {
                "schema_version": SCHEMA_VERSION,
                "recommendations": _recommendations_payload(state, session),
            }

    @app.get("/sessions/{session_id}/explanations/{item_id}")
    def get_explanation(session_id: str, item_id: int,
                        method: str = Query(default=None)):
        method = method or state.config.method
        if method not in (METHOD_SEARCH, METHOD_RELAX):
            raise ApiError(400, "unknown_method",
                           f"method must be search or relax, got {method!r}")
        session = state.store.get(session_id)
        with session.lock:
            key = (
                session.window.items,
                session.mask.values.tobytes(),
                item_id, method, state.config.k,
            )
            cached = session.explanation_cache.get(key)
            if cached is not None:
                return Response(content=cached, media_type="application/json")
            current = recommend_top_k(
                state.params, session.window, session.mask,
                state.config.k, state.config.exclude_history,
            )
            if item_id not in current:
                raise ApiError(404, "not_recommended",
                               f"item {item_id} is not currently recommended")
            req = RetroRequest(
                window=session.window, target_item=item_id,
                **retro_request_kwargs(state.config),
            )
            base_positions = set(session.mask.revoked_positions())
            if base_positions:
                # explain on the session's masked view: already revoked slots
                # are treated as padding by substituting them out
                masked_items = tuple(
                    item if pos not in base_positions else -1
                    for pos, item in enumerate(session.window.items)
                )
                req.window = SequenceWindow(masked_items, session.window.capacity)
            if method == METHOD_SEARCH:
                record = greedy_retrospective(state.params, req)
            else:
                record = relaxed_retrospective(state.params, req)
            record.user_id = session.user_id
            text = render_explanation(record, state.name_of,
                                      verb=state.config.verb)
            payload = {
                "schema_version": SCHEMA_VERSION,
                "item_id": item_id,
                "method": method,
                "status": record.status,
                "revocable": [
                    {"position": pos, "item_id": item,
                     "name": state.name_of(item)}
                    for pos, item in record.revoked
                ],
                "iterations": record.iterations,
                "text": text,
                "reason": record.note or None,
            }
            body = json.dumps(payload, sort_keys=True)
            session.explanation_cache[key] = body
            return Response(content=body, media_type="application/json")

    @app.post("/sessions/{session_id}/revoke")
    def revoke(session_id: str, body: RevokeBody):
        session = state.store.get(session_id)
        with session.lock:
            positions = body.positions
            eff = session.window.effective_length
            if len(set(positions)) != len(positions):
                raise ApiError(400, "invalid_positions", "duplicate positions")
            already = set(session.mask.revoked_positions())
            for pos in positions:
                if not (0 <= pos < eff):
                    raise ApiError(400, "invalid_positions",
                                   f"position {pos} outside 0..{eff - 1}")
                if pos in already:
                    raise ApiError(400, "invalid_positions",
                                   f"position {pos} already revoked")
            mask = session.mask
            for pos in positions:
                mask = mask.with_revoked(pos)
            session.mask = mask
            session.explanation_cache.clear()
            return {
                "schema_version": SCHEMA_VERSION,
                "recommendations": _recommendations_payload(state, session),
            }

    @app.post("/sessions/{session_id}/interact")
    def interact(session_id: str, body: InteractBody):
        session = state.store.get(session_id)
        with session.lock:
            if session.pending is not None:
                raise ApiError(409, "pending_interaction",
                               "confirm or undo the pending interaction first")
            if not (0 <= body.item_id < state.params.n_items):
                raise ApiError(404, "unknown_item", f"no item {body.item_id}")
            record = prospective_explanation(
                state.params, session.window, body.item_id,
                state.config.k, mask=session.mask,
                exclude_history=state.config.exclude_history,
            )
            session.pending = body.item_id
            text = render_explanation(record, state.name_of)
            return {
                "schema_version": SCHEMA_VERSION,
                "pending_item": body.item_id,
                "added_items": [
                    {"item_id": i, "name": state.name_of(i)}
                    for i in sorted(record.added_items)
                ],
                "text": text,
            }

    @app.post("/sessions/{session_id}/confirm")
    def confirm(session_id: str):
        session = state.store.get(session_id)
        with session.lock:
            if session.pending is None:
                raise ApiError(409, "nothing_pending", "no pending interaction")
            session.window, session.mask = append_with_mask(
                session.window, session.mask, session.pending
            )
            session.pending = None
            session.explanation_cache.clear()
            return {
                "schema_version": SCHEMA_VERSION,
                "recommendations": _recommendations_payload(state, session),
            }

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str):
        session = state.store.get(session_id)
        with session.lock:
            if session.pending is None:
                raise ApiError(409, "nothing_pending", "no pending interaction")
            session.pending = None
            return {
                "schema_version": SCHEMA_VERSION,
                "recommendations": _recommendations_payload(state, session),
            }

    if state.config.static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=state.config.static_dir,
                                   html=True), name="static")
    return app


def build_state(params: ScorerParams, sequences: dict, item_names: dict,
                config: Config) -> ServiceState:
    """Serving state from full user histories (the last max_len interactions)."""
    windows = {
        user: SequenceWindow(tuple(seq[-params.max_len:]), params.max_len)
        for user, seq in sequences.items()
        if seq
    }
    return ServiceState(params=params, user_windows=windows,
                        item_names=item_names, config=config)
