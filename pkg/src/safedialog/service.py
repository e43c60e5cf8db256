"""HTTP service: agent-bridge sessions, annotation queue, loop control,
evaluation, and static assets for the browser console.

All bodies are JSON; errors come back as {code, message, detail}. When an
auth token is configured, every mutating endpoint requires it and rejects
with 401 before any side effect.
"""
from __future__ import annotations

import base64
import binascii
import copy
import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .corpus import CorpusPools
from .dialogue import SessionManager
from .errors import (
    AlreadyDiscarded,
    BackendError,
    ClosedSession,
    DialogueTurnError,
    OutOfOrder,
    UnknownId,
)
from .loop import LoopConfig, MockLearner, run_loop


@dataclass
class ServiceConfig:
    auth_token: str | None = None
    static_path: str | None = None


class SessionBody(BaseModel):
    image: str
    title: str = ""


class MessageBody(BaseModel):
    text: str


class AnnotationBody(BaseModel):
    decision: str
    edited_text: str | None = None


def _error(status: int, code: str, message: str, detail: str = ""):
    return JSONResponse(status_code=status, content={
        "code": code, "message": message, "detail": detail})


@dataclass
class LoopJob:
    job_id: str
    status: str = "running"  # running | done | failed
    snapshot: dict = field(default_factory=dict)
    error: str = ""


def _decode_image(image: str) -> bytes | str:
    """Pass URIs through; decode base64 payloads; reject garbage."""
    if image.startswith(("http://", "https://", "file://", "data:")):
        return image
    try:
        return base64.b64decode(image, validate=True)
    except (binascii.Error, ValueError) as e:
        raise ValueError(f"invalid base64 image: {e}")


def create_app(pools: CorpusPools, bindings, config: ServiceConfig | None = None,
               learner_factory=MockLearner, sessions: SessionManager | None = None
               ) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="safedialog")
    sessions = sessions or SessionManager(bindings)
    jobs: dict[str, LoopJob] = {}
    job_lock = threading.Lock()
    active_job: list[str] = []  # holds at most one running job id

    def check_auth(request: Request):
        if config.auth_token is None:
            return None
        token = request.headers.get("x-auth-token")
        if token != config.auth_token:
            return _error(401, "unauthorized", "missing or invalid auth token")
        return None

    # --- sessions (agent bridge) ---

    @app.post("/sessions")
    def post_session(body: SessionBody, request: Request):
        denied = check_auth(request)
        if denied:
            return denied
        try:
            image = _decode_image(body.image)
        except ValueError as e:
            return _error(400, "bad_image", str(e))
        if not image:
            return _error(400, "bad_image", "empty image")
        try:
            state = sessions.start_session(image, body.title)
        except BackendError as e:
            return _error(502, "vision_backend", str(e))
        if state.idle:
            return JSONResponse(status_code=200, content={
                "session_id": state.session_id, "status": "idle"})
        return JSONResponse(status_code=201, content={
            "session_id": state.session_id,
            "status": state.status,
            "first_turn": state.conversation.turns[0].text,
        })

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            state = sessions.get(session_id)
        except KeyError:
            return _error(404, "unknown_session", session_id)
        return {
            "session_id": state.session_id,
            "status": state.status,
            "idle": state.idle,
            "turns": [t.to_dict() for t in state.conversation.turns],
        }

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody, request: Request):
        denied = check_auth(request)
        if denied:
            return denied
        try:
            turn = sessions.advance_session(session_id, body.text)
        except KeyError:
            return _error(404, "unknown_session", session_id)
        except (ClosedSession, OutOfOrder) as e:
            return _error(409, "conflict", str(e))
        except (BackendError, DialogueTurnError) as e:
            return _error(502, "backend", str(e))
        return {"turn_index": turn.index, "agent_text": turn.text,
                "sdrt": turn.sdrt.display_name if turn.sdrt else None}

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str, request: Request):
        denied = check_auth(request)
        if denied:
            return denied
        try:
            state = sessions.close_session(session_id)
        except KeyError:
            return _error(404, "unknown_session", session_id)
        return {"session_id": state.session_id, "status": state.status}

    # --- annotation queue ---

    @app.get("/annotations/queue")
    def get_queue():
        items = [
            {
                "record_id": r.id,
                "violation_text": r.violation_text,
                "image_uri": r.image_uri,
                "status": r.annotation_status,
            }
            for r in pools.unlabeled if r.annotation_status == "unreviewed"
        ]
        return {"items": items}

    @app.post("/annotations/{record_id}")
    def post_annotation(record_id: str, body: AnnotationBody, request: Request):
        denied = check_auth(request)
        if denied:
            return denied
        if body.decision not in ("correct", "edit", "discard"):
            return _error(400, "bad_decision", body.decision)
        if body.decision == "edit" and not body.edited_text:
            return _error(422, "missing_edited_text",
                          "edit decision requires edited_text")
        with pools.lock:
            try:
                rec = pools.get(record_id)
            except UnknownId:
                return _error(404, "unknown_record", record_id)
            if rec.annotation_status != "unreviewed":
                return _error(409, "already_decided",
                              f"record is {rec.annotation_status}")
            try:
                rec = pools.apply_annotation(record_id, body.decision,
                                             body.edited_text)
            except AlreadyDiscarded:
                return _error(409, "already_discarded", record_id)
        return {"record_id": rec.id, "status": rec.annotation_status,
                "effective_text": rec.effective_text()}

    # --- loop control ---

    @app.post("/loop/run")
    def post_loop(body: dict, request: Request):
        denied = check_auth(request)
        if denied:
            return denied
        try:
            loop_config = LoopConfig.from_dict(body)
        except (TypeError, ValueError) as e:
            return _error(400, "bad_config", str(e))
        with job_lock:
            if active_job:
                return _error(409, "job_already_running", active_job[0])
            job = LoopJob(job_id=str(uuid.uuid4()))
            jobs[job.job_id] = job
            active_job.append(job.job_id)

        def on_iteration(state):
            job.snapshot = copy.deepcopy(state.to_dict())

        def runner():
            try:
                final = run_loop(pools, loop_config, bindings,
                                 learner_factory(), on_iteration=on_iteration)
                job.snapshot = copy.deepcopy(final.to_dict())
                job.status = "done"
            except Exception as e:
                job.status = "failed"
                job.error = str(e)
            finally:
                with job_lock:
                    active_job.clear()

        threading.Thread(target=runner, daemon=True).start()
        return JSONResponse(status_code=202, content={"job_id": job.job_id})

    @app.get("/loop/{job_id}")
    def get_loop(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            return _error(404, "unknown_job", job_id)
        return {"job_id": job.job_id, "status": job.status,
                "error": job.error, "state": job.snapshot}

    if config.static_path:
        app.mount("/console", StaticFiles(directory=config.static_path,
                                          html=True), name="console")

    app.state.sessions = sessions
    app.state.pools = pools
    return app
