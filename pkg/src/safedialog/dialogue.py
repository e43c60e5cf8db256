"""Conversation protocol: 4-turn training dialogues and open deployment sessions.

Turn #1 is always the agent's violation description. Training conversations
complete at exactly 4 turns (agent/user/agent/user); deployment sessions have
no turn cap and close only explicitly. Appends are atomic: an advance commits
the user turn and the agent reply together or not at all.
"""
from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from . import gateway, relations
from .errors import ClosedSession, DialogueTurnError, OutOfOrder
from .prompts import load_template
from .relations import CoherenceAnnotation, SdrtRelation


@dataclass
class Turn:
    index: int  # 1-based
    speaker: str  # agent | user
    text: str
    sdrt: SdrtRelation | None = None  # agent turns >= 3 carry their relation

    def to_dict(self) -> dict:
        d = {"index": self.index, "speaker": self.speaker, "text": self.text}
        if self.sdrt is not None:
            d["sdrt"] = self.sdrt.display_name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Turn":
        sdrt = relations.parse_sdrt(d["sdrt"]) if d.get("sdrt") else None
        return cls(d["index"], d["speaker"], d["text"], sdrt)


@dataclass
class Conversation:
    mode: str  # training | deployment
    turns: list[Turn] = field(default_factory=list)
    record_id: str | None = None

    def append(self, speaker: str, text: str,
               sdrt: SdrtRelation | None = None) -> Turn:
        expected = "agent" if len(self.turns) % 2 == 0 else "user"
        if speaker != expected:
            raise OutOfOrder(
                f"turn {len(self.turns) + 1} must be {expected}, got {speaker}")
        if self.mode == "training" and len(self.turns) >= 4:
            raise OutOfOrder("training conversations have exactly 4 turns")
        turn = Turn(index=len(self.turns) + 1, speaker=speaker, text=text,
                    sdrt=sdrt)
        self.turns.append(turn)
        return turn

    def render(self) -> str:
        return "\n".join(
            f"Turn {t.index} ({t.speaker}): {t.text}" for t in self.turns)

    def agent_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.speaker == "agent"]

    def user_turns(self) -> list[Turn]:
        return [t for t in self.turns if t.speaker == "user"]

    def to_dict(self) -> dict:
        return {"mode": self.mode, "record_id": self.record_id,
                "turns": [t.to_dict() for t in self.turns]}

    @classmethod
    def from_dict(cls, d: dict) -> "Conversation":
        return cls(mode=d["mode"], record_id=d.get("record_id"),
                   turns=[Turn.from_dict(t) for t in d["turns"]])


def _simulate_user(conversation: Conversation, user_sim) -> str:
    prompt = load_template("user_simulator").format(
        history=conversation.render())
    return user_sim.complete([{"role": "user", "content": prompt}])


def _learner_reply(conversation: Conversation, learner,
                   annotation: CoherenceAnnotation | None) -> str:
    if annotation is not None:
        prompt = load_template("learner").format(
            history=conversation.render(),
            pdtb_tags=", ".join(r.display_name for r in annotation.pdtb_tags),
            sdrt_relation=annotation.sdrt_choice.display_name)
    else:
        prompt = load_template("learner_plain").format(
            history=conversation.render())
    return learner.complete([{"role": "user", "content": prompt}])


def build_scoring_context(record, bindings) -> tuple[Conversation, str]:
    """Simulated 2-turn context plus the learner's Turn #3 response.

    Used by selection: the judge scores this response against this context.
    """
    conv = Conversation(mode="training", record_id=record.id)
    conv.append("agent", record.effective_text())
    conv.append("user", _simulate_user(conv, bindings.user_simulator))
    response = _learner_reply(conv, bindings.learner, annotation=None)
    return conv, response


def run_training_dialogue(record, bindings,
                          use_distiller: bool = False
                          ) -> tuple[Conversation, CoherenceAnnotation]:
    """Run the exact 4-turn training protocol for one record.

    Turn #1 reuses the stored (human-verified) violation text. Turn #3 comes
    from the distiller when building teacher data, else from the learner,
    conditioned on the PDTB tags and chosen SDRT relation. Failures carry the
    turn index they occurred at.
    """
    conv = Conversation(mode="training", record_id=record.id)
    conv.append("agent", record.effective_text())
    try:
        conv.append("user", _simulate_user(conv, bindings.user_simulator))
    except Exception as e:
        raise DialogueTurnError(2, e) from e
    try:
        pdtb_tags = relations.tag_violation(conv.turns[0].text,
                                            bindings.pdtb_tagger)
        sdrt = relations.choose_turn_relation(conv, bindings.sdrt_tagger)
        annotation = CoherenceAnnotation(pdtb_tags=pdtb_tags, sdrt_choice=sdrt)
        if use_distiller:
            text3 = gateway.distill(conv.render(), annotation,
                                    bindings.distiller)
        else:
            text3 = _learner_reply(conv, bindings.learner, annotation)
        conv.append("agent", text3, sdrt=sdrt)
    except DialogueTurnError:
        raise
    except Exception as e:
        raise DialogueTurnError(3, e) from e
    try:
        conv.append("user", _simulate_user(conv, bindings.user_simulator))
    except Exception as e:
        raise DialogueTurnError(4, e) from e
    return conv, annotation


@dataclass
class SessionState:
    session_id: str
    conversation: Conversation
    status: str  # active | closed
    created_at: float
    updated_at: float
    idle: bool = False  # closed immediately because no violation was found


class SessionManager:
    """Deployment sessions: one writer per session, many sessions at once."""

    def __init__(self, bindings, turn_cap: int | None = None,
                 clock=time.time):
        self.bindings = bindings
        self.turn_cap = turn_cap
        self.clock = clock
        self._sessions: dict[str, SessionState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def start_session(self, image: bytes | str, title: str = "") -> SessionState:
        violation = gateway.describe_image(image, title, self.bindings.vision)
        now = self.clock()
        conv = Conversation(mode="deployment")
        if violation is None:
            state = SessionState(session_id=str(uuid.uuid4()),
                                 conversation=conv, status="closed",
                                 created_at=now, updated_at=now, idle=True)
        else:
            conv.append("agent", violation)
            state = SessionState(session_id=str(uuid.uuid4()),
                                 conversation=conv, status="active",
                                 created_at=now, updated_at=now)
        with self._registry_lock:
            self._sessions[state.session_id] = state
            self._locks[state.session_id] = threading.Lock()
        return state

    def get(self, session_id: str) -> SessionState:
        state = self._sessions.get(session_id)
        if state is None:
            raise KeyError(session_id)
        return state

    def advance_session(self, session_id: str, user_text: str) -> Turn:
        """Append the user turn and the agent reply atomically."""
        state = self.get(session_id)
        with self._locks[session_id]:
            if state.status != "active":
                raise ClosedSession(session_id)
            conv = state.conversation
            if conv.turns and conv.turns[-1].speaker != "agent":
                raise OutOfOrder("last turn is not the agent's")
            if self.turn_cap is not None and len(conv.turns) >= self.turn_cap:
                raise ClosedSession(f"turn cap {self.turn_cap} reached")
            # stage both turns on a copy so a backend failure leaves no trace
            staged = Conversation(mode=conv.mode, turns=list(conv.turns),
                                  record_id=conv.record_id)
            staged.append("user", user_text)
            sdrt = relations.choose_turn_relation(staged,
                                                  self.bindings.sdrt_tagger)
            reply = _learner_reply(staged, self.bindings.learner,
                                   annotation=None)
            conv.append("user", user_text)
            agent_turn = conv.append("agent", reply, sdrt=sdrt)
            state.updated_at = self.clock()
            return agent_turn

    def close_session(self, session_id: str) -> SessionState:
        state = self.get(session_id)
        state.status = "closed"
        state.updated_at = self.clock()
        return state

    def sessions(self) -> list[SessionState]:
        return list(self._sessions.values())
