"""Uniform access to all model roles over a chat-style JSON protocol.

Two backends: a chat-completions HTTP client and a fully deterministic
scripted mock for tests. Every request can be audited to a line-delimited
JSON log with monotonically increasing sequence numbers.
"""
from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, IO

import requests

from .errors import (
    BackendTimeout,
    BackendUnavailable,
    ProtocolError,
    UnparseableJudgment,
)
from .prompts import load_template

NO_VIOLATION_SENTINEL = "NO_VIOLATION"


@dataclass
class ChatMessage:
    role: str  # system | user | assistant
    content: str


def validate_messages(messages: list[dict]) -> None:
    """Optional leading system message, then alternating user/assistant."""
    seq = list(messages)
    if not seq:
        raise ValueError("empty message list")
    if seq[0]["role"] == "system":
        seq = seq[1:]
    expected = "user"
    for msg in seq:
        if msg["role"] != expected:
            raise ValueError(
                f"expected role {expected!r}, got {msg['role']!r}")
        if not msg.get("content"):
            raise ValueError("user/assistant content must be non-empty")
        expected = "assistant" if expected == "user" else "user"


def request_hash(messages: list[dict]) -> str:
    canon = json.dumps(messages, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class AuditLog:
    """Line-delimited JSON request log, one object per completed call."""

    def __init__(self, fh: IO[str] | None = None):
        self._fh = fh
        self._lock = threading.Lock()
        self._seq = 0

    def record(self, role: str, model_id: str, req_hash: str,
               latency_ms: int, outcome: str) -> None:
        with self._lock:
            self._seq += 1
            if self._fh is not None:
                self._fh.write(json.dumps({
                    "seq": self._seq,
                    "role": role,
                    "model_id": model_id,
                    "request_hash": req_hash,
                    "latency_ms": latency_ms,
                    "outcome": outcome,
                }, sort_keys=True) + "\n")
                self._fh.flush()

    @property
    def seq(self) -> int:
        return self._seq


@dataclass
class BackendConfig:
    endpoint: str
    model_id: str
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 2
    api_key_env: str | None = None
    backoff_base: float = 1.0  # seconds; exponential factor 2

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class HttpBackend:
    """Chat-completions-style JSON over HTTP."""

    def __init__(self, config: BackendConfig, session=None):
        self.config = config
        self._session = session or requests.Session()

    @property
    def model_id(self) -> str:
        return self.config.model_id

    def complete(self, messages: list[dict]) -> str:
        validate_messages(messages)
        cfg = self.config
        headers = {"Content-Type": "application/json"}
        if cfg.api_key_env:
            key = os.environ.get(cfg.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": cfg.model_id,
            "messages": messages,
            "temperature": cfg.temperature,
        }
        last_err: Exception | None = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                time.sleep(cfg.backoff_base * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(
                    cfg.endpoint, json=payload, headers=headers,
                    timeout=cfg.timeout)
            except requests.Timeout as e:
                last_err = BackendTimeout(str(e))
                continue
            except requests.RequestException as e:
                last_err = BackendUnavailable(str(e))
                continue
            if resp.status_code >= 500:
                last_err = ProtocolError(resp.status_code, resp.text)
                continue
            if resp.status_code != 200:
                raise ProtocolError(resp.status_code, resp.text)
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as e:
                raise ProtocolError(resp.status_code,
                                    f"bad response shape: {e}")
        if isinstance(last_err, BackendTimeout):
            raise last_err
        raise BackendUnavailable(str(last_err))


Matcher = Callable[[str], bool]
Responder = Callable[[list[dict]], str]


@dataclass
class MockScript:
    """Ordered (matcher, response) rules plus a deterministic fallback.

    A matcher is a substring of the last message content or a predicate over
    it; a response is a string or a (deterministic) function of the full
    message list. Same request always yields the same response.
    """

    rules: list[tuple] = field(default_factory=list)
    fallback: Responder | None = None

    def respond(self, messages: list[dict]) -> str:
        last = messages[-1]["content"]
        for matcher, response in self.rules:
            hit = matcher(last) if callable(matcher) else (matcher in last)
            if hit:
                return response(messages) if callable(response) else response
        if self.fallback is not None:
            return self.fallback(messages)
        return f"mock:{request_hash(messages)[:12]}"


class MockBackend:
    """Deterministic scripted backend for exact tests."""

    def __init__(self, script: MockScript | None = None,
                 model_id: str = "mock"):
        self.script = script or MockScript()
        self.model_id = model_id

    def complete(self, messages: list[dict]) -> str:
        validate_messages(messages)
        return self.script.respond(messages)


def default_role_scripts() -> dict[str, MockScript]:
    """Per-role mock scripts that speak each role's expected dialect.

    The judge emits attribute JSON and the taggers emit in-inventory relation
    names, all derived from the request hash, so an all-mock stack runs the
    full pipeline deterministically without any real backend.
    """
    from .relations import PdtbRelation, SdrtRelation

    def pick(names):
        def responder(messages):
            return names[int(request_hash(messages)[:8], 16) % len(names)]
        return responder

    def judge_json(messages):
        h = request_hash(messages)
        vals = (int(h[i:i + 8], 16) / 0xFFFFFFFF for i in (0, 8, 16))
        return json.dumps({a: round(v, 6) for a, v in
                           zip(("safety", "resolution", "sentiment"), vals)})

    return {
        "vision": MockScript(
            fallback=lambda m: "Unattended hazard near the work area"),
        "user_simulator": MockScript(
            fallback=lambda m: "I still do not see why that is a problem "
            f"({request_hash(m)[:6]})."),
        "judge": MockScript(fallback=judge_json),
        "distiller": MockScript(
            fallback=lambda m: "Move the hazard out of reach and keep the "
            "area clear while you work."),
        "pdtb_tagger": MockScript(
            fallback=pick([r.value for r in PdtbRelation])),
        "sdrt_tagger": MockScript(
            fallback=pick([r.value for r in SdrtRelation])),
        "learner": MockScript(
            fallback=lambda m: "I recommend addressing that hazard before "
            "continuing."),
    }


class RoleClient:
    """Binds a backend to a named role and an audit log."""

    def __init__(self, role: str, backend, audit: AuditLog | None = None):
        self.role = role
        self.backend = backend
        self.audit = audit

    @property
    def model_id(self) -> str:
        return getattr(self.backend, "model_id", "unknown")

    def complete(self, messages: list[dict]) -> str:
        req_hash = request_hash(messages)
        is_mock = isinstance(self.backend, MockBackend)
        start = time.monotonic()
        try:
            text = self.backend.complete(messages)
        except Exception:
            if self.audit is not None:
                latency = 0 if is_mock else int(
                    (time.monotonic() - start) * 1000)
                self.audit.record(self.role, self.model_id, req_hash,
                                  latency, "error")
            raise
        if self.audit is not None:
            # mocks report zero latency so audit logs stay byte-reproducible
            latency = 0 if is_mock else int((time.monotonic() - start) * 1000)
            self.audit.record(self.role, self.model_id, req_hash,
                              latency, "ok")
        return text


ROLE_NAMES = ("vision", "user_simulator", "judge", "distiller",
              "pdtb_tagger", "sdrt_tagger", "learner")


@dataclass
class RoleBindings:
    """One backend per model role; roles may share a backend."""

    vision: object
    user_simulator: object
    judge: object
    distiller: object
    pdtb_tagger: object
    sdrt_tagger: object
    learner: object

    @classmethod
    def all_mock(cls, scripts: dict[str, MockScript] | None = None,
                 audit: AuditLog | None = None) -> "RoleBindings":
        merged = default_role_scripts()
        merged.update(scripts or {})
        return cls(**{
            role: RoleClient(role,
                             MockBackend(merged.get(role),
                                         model_id=f"mock-{role}"),
                             audit)
            for role in ROLE_NAMES
        })

    def validate(self) -> None:
        for role in ROLE_NAMES:
            if getattr(self, role) is None:
                raise ValueError(f"role {role!r} is not bound")


def complete(messages: list[dict], backend) -> str:
    return backend.complete(messages)


def describe_image(image: bytes | str, title: str, vision_backend) -> str | None:
    """Ask the vision backend for the key safety violation in an image.

    Returns the violation text, or None when the backend emits the
    NO_VIOLATION sentinel.
    """
    if not image:
        raise ValueError("image must be non-empty")
    if isinstance(image, bytes):
        image_ref = "data:image/jpeg;base64," + base64.b64encode(image).decode()
    else:
        image_ref = image
    prompt = load_template("vision").format(title=title)
    messages = [{"role": "user", "content": f"{prompt}\n[image] {image_ref}"}]
    reply = vision_backend.complete(messages).strip()
    if NO_VIOLATION_SENTINEL in reply:
        return None
    return reply


def _extract_json_object(text: str) -> dict | None:
    text = (text or "").strip()
    try:
        obj = json.loads(text)
        if isinstance(obj, dict):
            return obj
    except ValueError:
        pass
    start = text.find("{")
    end = text.rfind("}")
    if start != -1 and end > start:
        try:
            obj = json.loads(text[start:end + 1])
            if isinstance(obj, dict):
                return obj
        except ValueError:
            return None
    return None


def _clamp01(x: float) -> float:
    return max(0.0, min(1.0, float(x)))


def judge_attributes(context: str, response: str, attributes,
                     judge_backend) -> dict[str, float]:
    """Score a response on each attribute in [0,1] via the judge backend.

    Parses a JSON object keyed by attribute name; clamps out-of-range values;
    one strict reprompt on unparseable or incomplete output.
    """
    names = list(attributes)
    example = json.dumps({n: 0.5 for n in names})
    prompt = load_template("judge").format(
        context=context, response=response,
        attributes=", ".join(names), example=example)
    messages = [{"role": "user", "content": prompt}]
    for attempt in range(2):
        raw = judge_backend.complete(messages)
        obj = _extract_json_object(raw)
        if obj is not None and all(n in obj for n in names):
            try:
                return {n: _clamp01(obj[n]) for n in names}
            except (TypeError, ValueError):
                pass
        messages = messages + [
            {"role": "assistant", "content": raw},
            {"role": "user", "content": load_template("judge_retry").format(
                attributes=", ".join(names))},
        ]
    raise UnparseableJudgment(
        f"judge output unusable after retry: {raw[:120]!r}")


def distill(history_text: str, annotation, distiller_backend) -> str:
    """Obtain the teacher response conditioned on the coherence annotation."""
    prompt = load_template("distill").format(
        history=history_text,
        pdtb_tags=", ".join(r.display_name for r in annotation.pdtb_tags),
        sdrt_relation=annotation.sdrt_choice.display_name,
    )
    return distiller_backend.complete([{"role": "user", "content": prompt}])


def render_distill_prompt(history_text: str, annotation) -> str:
    """Expose the rendered distillation prompt for auditing."""
    return load_template("distill").format(
        history=history_text,
        pdtb_tags=", ".join(r.display_name for r in annotation.pdtb_tags),
        sdrt_relation=annotation.sdrt_choice.display_name,
    )
