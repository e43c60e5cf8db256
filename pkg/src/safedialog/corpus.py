"""Safety-violation corpus: records, pools, annotation, agreement, splits.

Records arrive as line-delimited JSON (one object per line). Unknown fields
are preserved on round-trip. Pools are single-writer, multi-reader.
"""
from __future__ import annotations

import csv
import json
import random
import threading
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Iterator

from .errors import (
    AlreadyDiscarded,
    DuplicateId,
    EmptyInput,
    InsufficientPool,
    LengthMismatch,
    UnknownId,
)

_KNOWN_FIELDS = {
    "id", "image_uri", "source_title", "violation_text", "keywords",
    "annotation_status", "edited_text", "error_category",
}


class ErrorCategory(Enum):
    OCR = "OCR"
    VISUAL_IMPAIRMENT = "VisualImpairment"
    MISMATCH = "Mismatch"
    UNIMPORTANT = "Unimportant"
    HALLUCINATION = "Hallucination"
    MISSED_SAFETY = "MissedSafety"


VALID_STATUSES = ("unreviewed", "correct", "edited", "discarded")


@dataclass
class SafetyRecord:
    """One image-derived safety violation; the unit of the U and L pools."""

    id: str
    image_uri: str
    violation_text: str
    source_title: str = ""
    keywords: set[str] = field(default_factory=set)
    annotation_status: str = "unreviewed"
    edited_text: str | None = None
    error_category: ErrorCategory | None = None
    extra: dict = field(default_factory=dict)  # unknown input fields, kept for round-trip

    def __post_init__(self):
        self.keywords = {k.lower() for k in self.keywords}
        if self.annotation_status not in VALID_STATUSES:
            raise ValueError(f"bad annotation_status {self.annotation_status!r}")
        if self.annotation_status == "edited":
            if not self.edited_text:
                raise ValueError("status 'edited' requires non-empty edited_text")
        elif self.edited_text is not None:
            raise ValueError("edited_text only allowed with status 'edited'")

    def effective_text(self) -> str:
        """Text downstream consumers read: the human edit when present."""
        return self.edited_text if self.edited_text else self.violation_text

    @property
    def discarded(self) -> bool:
        return self.annotation_status == "discarded"

    def to_dict(self) -> dict:
        d = dict(self.extra)
        d.update(
            id=self.id,
            image_uri=self.image_uri,
            violation_text=self.violation_text,
            source_title=self.source_title,
            keywords=sorted(self.keywords),
            annotation_status=self.annotation_status,
        )
        if self.edited_text is not None:
            d["edited_text"] = self.edited_text
        if self.error_category is not None:
            d["error_category"] = self.error_category.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SafetyRecord":
        for req in ("id", "image_uri", "violation_text"):
            if req not in d or not isinstance(d[req], str) or not d[req]:
                raise ValueError(f"missing or empty field {req!r}")
        cat = d.get("error_category")
        return cls(
            id=d["id"],
            image_uri=d["image_uri"],
            violation_text=d["violation_text"],
            source_title=d.get("source_title", ""),
            keywords=set(d.get("keywords", [])),
            annotation_status=d.get("annotation_status", "unreviewed"),
            edited_text=d.get("edited_text"),
            error_category=ErrorCategory(cat) if cat else None,
            extra={k: v for k, v in d.items() if k not in _KNOWN_FIELDS},
        )


@dataclass
class DatasetSplit:
    name: str  # one of random / coherence / mcodal / test
    record_ids: list[str]
    seed: int

    def __post_init__(self):
        if len(set(self.record_ids)) != len(self.record_ids):
            raise ValueError("split contains duplicate ids")


class CorpusPools:
    """The unlabeled pool U and labeled pool L.

    Single-writer, multi-reader: mutations take the internal lock; reads of
    snapshots are safe without it.
    """

    def __init__(self, records: Iterable[SafetyRecord] = ()):
        self._lock = threading.RLock()
        self.unlabeled: list[SafetyRecord] = []
        self.labeled: list = []  # loop.LabeledExample
        self._by_id: dict[str, SafetyRecord] = {}
        for rec in records:
            self.add_record(rec)

    @property
    def lock(self) -> threading.RLock:
        return self._lock

    def add_record(self, rec: SafetyRecord) -> None:
        with self._lock:
            if rec.id in self._by_id:
                raise DuplicateId(rec.id)
            self.unlabeled.append(rec)
            self._by_id[rec.id] = rec

    def get(self, record_id: str) -> SafetyRecord:
        rec = self._by_id.get(record_id)
        if rec is None:
            raise UnknownId(record_id)
        return rec

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._by_id

    def eligible_unlabeled(self) -> list[SafetyRecord]:
        """Records still selectable: in U and not discarded."""
        labeled_ids = {ex.record.id for ex in self.labeled}
        return [
            r for r in self.unlabeled
            if not r.discarded and r.id not in labeled_ids
        ]

    def move_to_labeled(self, example) -> None:
        """Append a LabeledExample and drop its record from U."""
        with self._lock:
            rec = example.record
            if any(ex.record.id == rec.id for ex in self.labeled):
                raise DuplicateId(rec.id)
            self.unlabeled = [r for r in self.unlabeled if r.id != rec.id]
            self.labeled.append(example)

    def apply_annotation(self, record_id: str, decision: str,
                         edited_text: str | None = None) -> SafetyRecord:
        """Apply one of the three annotation actions to an unreviewed record.

        decision: "correct" | "edit" | "discard". Edits replace the text used
        downstream; discards leave the record stored but selection-ineligible.
        """
        with self._lock:
            rec = self.get(record_id)
            if rec.discarded:
                raise AlreadyDiscarded(record_id)
            if decision == "correct":
                rec.annotation_status = "correct"
            elif decision == "edit":
                if not edited_text:
                    raise ValueError("edit decision requires edited_text")
                rec.annotation_status = "edited"
                rec.edited_text = edited_text
            elif decision == "discard":
                rec.annotation_status = "discarded"
            else:
                raise ValueError(f"unknown decision {decision!r}")
            return rec

    def dump(self, fh: IO[str]) -> None:
        for rec in self.unlabeled:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


@dataclass
class IngestResult:
    pools: CorpusPools
    errors: list  # MalformedRecord / DuplicateId instances, with line numbers


def ingest_records(lines: Iterable[str] | IO[str]) -> IngestResult:
    """Parse line-delimited JSON records into a fresh unlabeled pool.

    Malformed lines and duplicate ids are collected (with line numbers), not
    fatal; all valid records are retained.
    """
    from .errors import MalformedRecord  # local to keep module import light

    pools = CorpusPools()
    errors: list = []
    for lineno, raw in enumerate(lines, start=1):
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            errors.append(MalformedRecord(lineno, f"invalid JSON: {e.msg}"))
            continue
        if not isinstance(obj, dict):
            errors.append(MalformedRecord(lineno, "not a JSON object"))
            continue
        try:
            rec = SafetyRecord.from_dict(obj)
        except ValueError as e:
            errors.append(MalformedRecord(lineno, str(e)))
            continue
        try:
            pools.add_record(rec)
        except DuplicateId:
            errors.append(DuplicateId(rec.id, lineno))
    return IngestResult(pools, errors)


def cohen_kappa(labels_a, labels_b) -> float:
    """Unweighted Cohen's kappa between two annotators' label sequences."""
    a = list(labels_a)
    b = list(labels_b)
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)}")
    if not a:
        raise EmptyInput("no labels")
    n = len(a)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    ca = Counter(a)
    cb = Counter(b)
    labels = set(ca) | set(cb)
    p_e = sum((ca[l] / n) * (cb[l] / n) for l in labels)
    if p_e == 1.0:
        # both annotators use a single shared label; agreement is perfect
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def keyword_histogram(records: Iterable[SafetyRecord]) -> dict[str, int]:
    """Keyword counts over non-discarded records; keys are lowercase."""
    counts: Counter[str] = Counter()
    for rec in records:
        if rec.discarded:
            continue
        counts.update(k.lower() for k in rec.keywords)
    return dict(counts)


def write_histogram_csv(histogram: dict[str, int], fh: IO[str]) -> None:
    writer = csv.writer(fh)
    writer.writerow(["keyword", "count"])
    for kw in sorted(histogram, key=lambda k: (-histogram[k], k)):
        writer.writerow([kw, histogram[kw]])


def extract_keywords(text: str, lexicon: Iterable[str]) -> set[str]:
    """Fallback extractor: lexicon entries found as substrings of the text.

    Used only for records that arrive without keywords.
    """
    lowered = text.lower()
    return {kw.lower() for kw in lexicon if kw.lower() in lowered}


def build_basic_splits(pools: CorpusPools, sizes: dict[str, int],
                       seed: int) -> dict[str, DatasetSplit]:
    """Draw disjoint uniform random train ("random") and test splits.

    The coherence split reuses the random split's ids, so only two splits are
    materialized here; the mcodal split comes from the active-learning loop.
    """
    train_n = sizes["train"]
    test_n = sizes["test"]
    eligible = [r.id for r in pools.eligible_unlabeled()]
    if train_n + test_n > len(eligible):
        raise InsufficientPool(
            f"need {train_n + test_n}, have {len(eligible)} eligible records")
    rng = random.Random(seed)
    shuffled = rng.sample(eligible, train_n + test_n)
    return {
        "random": DatasetSplit("random", shuffled[:train_n], seed),
        "test": DatasetSplit("test", shuffled[train_n:], seed),
    }
