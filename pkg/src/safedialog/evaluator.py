"""Automated evaluation: judge-scored dialogue quality, length/vocabulary
statistics, and keyword coverage of dataset splits.

Score columns are 100x the mean of per-dialogue judge values in [0,1].
Length unit is whitespace tokens; the unit is stamped into every report so
numbers are never compared across units silently.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from . import dialogue as dialogue_mod
from .corpus import CorpusPools, DatasetSplit
from .errors import EmptySet, SafedialogError
from .gateway import judge_attributes


class EvaluationFailed(SafedialogError):
    """A per-record evaluation failure, tagged with the record id."""

    def __init__(self, record_id: str, cause: Exception):
        super().__init__(f"record {record_id}: {cause}")
        self.record_id = record_id
        self.cause = cause
from .selector import AttributeSet

LENGTH_UNIT = "whitespace_tokens"


@dataclass
class DialogueMetrics:
    sentiment: float  # [0, 100]
    resolution: float
    safety: float
    avg_len_bot: float
    avg_len_user: float
    unique_tokens: int


@dataclass
class EvalReport:
    model_label: str
    metrics: DialogueMetrics
    n_dialogues: int
    per_dialogue: list[dict] = field(default_factory=list)
    length_unit: str = LENGTH_UNIT

    def to_dict(self) -> dict:
        return {
            "model_label": self.model_label,
            "length_unit": self.length_unit,
            "n_dialogues": self.n_dialogues,
            "metrics": {
                "sentiment": self.metrics.sentiment,
                "resolution": self.metrics.resolution,
                "safety": self.metrics.safety,
                "avg_len_bot": self.metrics.avg_len_bot,
                "avg_len_user": self.metrics.avg_len_user,
                "unique_tokens": self.metrics.unique_tokens,
            },
            "per_dialogue": self.per_dialogue,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def to_table(self) -> str:
        """Aligned text table following the standard column order."""
        cols = ["Model", "Sentiment", "Resolution", "Safety",
                "Avg. Length (bot)", "Avg. Length (user)", "#Unique Tokens"]
        m = self.metrics
        vals = [self.model_label, f"{m.sentiment:.2f}", f"{m.resolution:.2f}",
                f"{m.safety:.2f}", f"{m.avg_len_bot:.2f}",
                f"{m.avg_len_user:.2f}", str(m.unique_tokens)]
        widths = [max(len(c), len(v)) for c, v in zip(cols, vals)]
        head = "  ".join(c.ljust(w) for c, w in zip(cols, widths))
        row = "  ".join(v.ljust(w) for v, w in zip(vals, widths))
        return f"(lengths in {self.length_unit})\n{head}\n{row}\n"

    def write_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh)
        m = self.metrics
        writer.writerow(["model", "sentiment", "resolution", "safety",
                         "avg_len_bot", "avg_len_user", "unique_tokens",
                         "length_unit"])
        writer.writerow([self.model_label, m.sentiment, m.resolution,
                         m.safety, m.avg_len_bot, m.avg_len_user,
                         m.unique_tokens, self.length_unit])


@dataclass
class CoverageReport:
    method: str
    keywords_covered: int
    covered_set: set[str]
    pool_keywords: int

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "keywords_covered": self.keywords_covered,
            "covered_set": sorted(self.covered_set),
            "pool_keywords": self.pool_keywords,
        }


def score_dialogue(conversation, judge,
                   attributes: AttributeSet = AttributeSet()
                   ) -> dict[str, float]:
    """Judge a completed conversation along each attribute, clamped to [0,1]."""
    if len(conversation.turns) < 3:
        raise ValueError("conversation must have at least 3 turns")
    context = conversation.render()
    # the agent's final contribution is the response under evaluation
    last_agent = conversation.agent_turns()[-1].text
    return judge_attributes(context, last_agent, attributes, judge)


def _tokens(text: str) -> list[str]:
    return text.split()


def length_and_vocab(conversations: Sequence) -> tuple[float, float, int]:
    """Average turn lengths per party and the bot-side vocabulary size."""
    if not conversations:
        raise EmptySet("no conversations to evaluate")
    bot_lens: list[int] = []
    user_lens: list[int] = []
    vocab: set[str] = set()
    for conv in conversations:
        for t in conv.agent_turns():
            toks = _tokens(t.text)
            bot_lens.append(len(toks))
            vocab.update(tok.casefold() for tok in toks)
        for t in conv.user_turns():
            user_lens.append(len(_tokens(t.text)))
    avg_bot = sum(bot_lens) / len(bot_lens) if bot_lens else 0.0
    avg_user = sum(user_lens) / len(user_lens) if user_lens else 0.0
    return avg_bot, avg_user, len(vocab)


def keyword_coverage(split: DatasetSplit, pools: CorpusPools,
                     method: str | None = None) -> CoverageReport:
    """Distinct keywords represented in a split, against the whole pool."""
    covered: set[str] = set()
    for rid in split.record_ids:
        covered.update(pools.get(rid).keywords)  # raises UnknownId
    pool_kw: set[str] = set()
    for rec in pools.unlabeled:
        if not rec.discarded:
            pool_kw.update(rec.keywords)
    for ex in pools.labeled:
        pool_kw.update(ex.record.keywords)
    return CoverageReport(method=method or split.name,
                          keywords_covered=len(covered),
                          covered_set=covered,
                          pool_keywords=len(pool_kw))


def aggregate_report(model_label: str, per_dialogue: list[dict],
                     conversations: Sequence,
                     attributes: AttributeSet = AttributeSet()) -> EvalReport:
    """Fold per-dialogue judge triples and the conversations into one report."""
    if not per_dialogue:
        raise EmptySet("no dialogues to aggregate")
    n = len(per_dialogue)
    means = {a: 100.0 * sum(d[a] for d in per_dialogue) / n
             for a in attributes}
    avg_bot, avg_user, unique = length_and_vocab(conversations)
    metrics = DialogueMetrics(
        sentiment=means.get("sentiment", 0.0),
        resolution=means.get("resolution", 0.0),
        safety=means.get("safety", 0.0),
        avg_len_bot=avg_bot,
        avg_len_user=avg_user,
        unique_tokens=unique,
    )
    return EvalReport(model_label=model_label, metrics=metrics,
                      n_dialogues=n, per_dialogue=per_dialogue)


def evaluate_split(test: DatasetSplit, pools: CorpusPools, bindings,
                   attributes: AttributeSet = AttributeSet(),
                   model_label: str = "learner") -> EvalReport:
    """Run the 4-turn protocol with the learner on each test record and score it."""
    if not test.record_ids:
        raise EmptySet("empty test split")
    per_dialogue: list[dict] = []
    conversations = []
    for rid in test.record_ids:
        record = pools.get(rid)
        try:
            conv, _ = dialogue_mod.run_training_dialogue(
                record, bindings, use_distiller=False)
            triple = score_dialogue(conv, bindings.judge, attributes)
        except Exception as e:
            raise EvaluationFailed(rid, e) from e
        conversations.append(conv)
        per_dialogue.append({"record_id": rid, **triple})
    return aggregate_report(model_label, per_dialogue, conversations,
                            attributes)
