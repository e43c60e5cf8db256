"""Closed PDTB and SDRT relation inventories, parsing, and tagging helpers.

The inventories are fixed: 13 intra-sentential PDTB relations and 16
turn-level SDRT relations. Parsing is case-, whitespace- and
punctuation-insensitive and knows documented aliases; anything else is
rejected at this boundary so out-of-inventory tagger output never leaks in.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import NoValidRelation, UnknownRelation
from .prompts import load_template


class PdtbRelation(Enum):
    CONCESSION = "Concession"
    CONTRAST = "Contrast"
    CAUSE = "Cause"
    CAUSE_BELIEF = "Cause+Belief"
    CONDITION = "Condition"
    PURPOSE = "Purpose"
    CONJUNCTION = "Conjunction"
    INSTANTIATION = "Instantiation"
    LEVEL_OF_DETAIL = "Level-of-detail"
    MANNER = "Manner"
    SUBSTITUTION = "Substitution"
    ASYNCHRONOUS = "Asynchronous"
    SYNCHRONOUS = "Synchronous"

    @property
    def display_name(self) -> str:
        return self.value


class SdrtRelation(Enum):
    CONTINUATION = "Continuation"
    RESULT = "Result"
    ELABORATION = "Elaboration"
    CONDITIONAL = "Conditional"
    CONTRAST = "Contrast"
    ANSWER = "Answer"
    QELAB = "Q-elab"
    ACKNOWLEDGEMENT = "Acknowledgement"
    NARRATION = "Narration"
    CORRECTION = "Correction"
    EXPLANATION = "Explanation"
    ALTERNATION = "Alternation"
    PARALLEL = "Parallel"
    COMMENTARY = "Commentary"
    CLARIFICATION_Q = "Clarification Q"
    BACKGROUND = "Background"

    @property
    def display_name(self) -> str:
        return self.value


SDRT_ALIASES: dict[str, SdrtRelation] = {
    "Question answer pair": SdrtRelation.ANSWER,
    "Follow-up question": SdrtRelation.QELAB,
    "Clarification Q": SdrtRelation.CLARIFICATION_Q,
    "Clarification question": SdrtRelation.CLARIFICATION_Q,
}

PDTB_ALIASES: dict[str, PdtbRelation] = {}


def _normalize(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "", text.lower())


def _build_lookup(enum_cls, aliases):
    lookup = {}
    for member in enum_cls:
        lookup[_normalize(member.value)] = member
    for alias, member in aliases.items():
        lookup[_normalize(alias)] = member
    return lookup


_PDTB_LOOKUP = _build_lookup(PdtbRelation, PDTB_ALIASES)
_SDRT_LOOKUP = _build_lookup(SdrtRelation, SDRT_ALIASES)


def parse_pdtb(text: str) -> PdtbRelation:
    rel = _PDTB_LOOKUP.get(_normalize(text))
    if rel is None:
        raise UnknownRelation(text)
    return rel


def parse_sdrt(text: str) -> SdrtRelation:
    rel = _SDRT_LOOKUP.get(_normalize(text))
    if rel is None:
        raise UnknownRelation(text)
    return rel


@dataclass
class CoherenceAnnotation:
    """PDTB parse of the violation plus the SDRT relation of the response."""

    pdtb_tags: list[PdtbRelation]
    sdrt_choice: SdrtRelation

    def __post_init__(self):
        if not self.pdtb_tags:
            raise ValueError("pdtb_tags must be non-empty")
        if len(set(self.pdtb_tags)) != len(self.pdtb_tags):
            raise ValueError("pdtb_tags must not contain duplicates")

    def to_dict(self) -> dict:
        return {
            "pdtb": [r.display_name for r in self.pdtb_tags],
            "sdrt": self.sdrt_choice.display_name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoherenceAnnotation":
        return cls([parse_pdtb(t) for t in d["pdtb"]], parse_sdrt(d["sdrt"]))


def pdtb_inventory_text() -> str:
    return ", ".join(r.display_name for r in PdtbRelation)


def sdrt_inventory_text() -> str:
    return ", ".join(r.display_name for r in SdrtRelation)


_RETRY_SUFFIX = (
    "\nYour previous answer was not usable. "
    "Choose only from this list, and output nothing else: {inventory}"
)


def _split_labels(raw: str) -> list[str]:
    parts = re.split(r"[,\n;]+", raw)
    return [p.strip() for p in parts if p.strip()]


def tag_violation(violation: str, tagger) -> list[PdtbRelation]:
    """Ask the tagger backend for the PDTB relations of a violation text.

    Labels are parsed leniently, deduplicated preserving first occurrence;
    one strict reprompt before giving up.
    """
    if not violation:
        raise ValueError("violation text must be non-empty")
    inventory = pdtb_inventory_text()
    prompt = load_template("pdtb_tagger").format(
        inventory=inventory, violation=violation)
    messages = [{"role": "user", "content": prompt}]
    for attempt in range(2):
        raw = tagger.complete(messages)
        tags: list[PdtbRelation] = []
        for label in _split_labels(raw):
            try:
                rel = parse_pdtb(label)
            except UnknownRelation:
                continue
            if rel not in tags:
                tags.append(rel)
        if tags:
            return tags
        messages = messages + [
            {"role": "assistant", "content": raw},
            {"role": "user",
             "content": _RETRY_SUFFIX.format(inventory=inventory)},
        ]
    raise NoValidRelation(f"tagger produced no in-inventory PDTB label for: "
                          f"{violation[:80]!r}")


def choose_turn_relation(history, tagger) -> SdrtRelation:
    """Ask the tagger which SDRT relation the next agent response should hold.

    history is a Conversation with at least the first two turns.
    """
    if len(history.turns) < 2:
        raise ValueError("history must contain at least 2 turns")
    inventory = sdrt_inventory_text()
    rendered = "\n".join(
        f"Turn {t.index} ({t.speaker}): {t.text}" for t in history.turns)
    prompt = load_template("sdrt_tagger").format(
        inventory=inventory, history=rendered)
    messages = [{"role": "user", "content": prompt}]
    for attempt in range(2):
        raw = tagger.complete(messages)
        labels = _split_labels(raw) or [raw.strip()]
        for label in labels:
            try:
                return parse_sdrt(label)
            except UnknownRelation:
                continue
        messages = messages + [
            {"role": "assistant", "content": raw},
            {"role": "user",
             "content": _RETRY_SUFFIX.format(inventory=inventory)},
        ]
    raise NoValidRelation("tagger produced no in-inventory SDRT label")
