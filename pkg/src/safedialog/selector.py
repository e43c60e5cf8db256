"""Informativeness scoring and per-cluster selection.

Selection follows the composite-score rule: the judge scores the learner's
generated response on each attribute, the composite is the sum, and the
most informative instance in a cluster is the one where the composite is
lowest (the learner performs worst). The inverted reading (highest
composite) is available behind `selection_rule` for ablation only.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from typing import Callable, IO, Iterable, Sequence

from .errors import (
    ClusterScoringFailed,
    InsufficientCandidates,
    NotADistribution,
)
from .gateway import judge_attributes

DEFAULT_ATTRIBUTES = ("safety", "resolution", "sentiment")


@dataclass(frozen=True)
class AttributeSet:
    names: tuple[str, ...] = DEFAULT_ATTRIBUTES

    def __post_init__(self):
        if not self.names:
            raise ValueError("attribute set must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("attribute names must be unique")

    def __iter__(self):
        return iter(self.names)

    def __len__(self):
        return len(self.names)


@dataclass
class CompositeScore:
    per_attribute: dict[str, float]
    total: float
    informativeness: float

    @classmethod
    def from_attributes(cls, per_attribute: dict[str, float]) -> "CompositeScore":
        total = sum(per_attribute.values())
        return cls(per_attribute=dict(per_attribute), total=total,
                   informativeness=-total)


@dataclass
class InformativenessMatrix:
    entries: dict[tuple[int, str], float] = field(default_factory=dict)
    generated: dict[str, str] = field(default_factory=dict)
    per_attribute: dict[str, dict[str, float]] = field(default_factory=dict)


@dataclass
class SelectionResult:
    picks: dict[int, str]
    scores: InformativenessMatrix


def composite_score(context: str, response: str, attributes: AttributeSet,
                    judge) -> CompositeScore:
    """Judge one generated response and fold it into a composite score."""
    if not response:
        raise ValueError("response must be non-empty")
    values = judge_attributes(context, response, attributes, judge)
    return CompositeScore.from_attributes(values)


def select_per_cluster(candidates: dict[int, Sequence[str]],
                       generate: Callable[[str], tuple[str, str]],
                       judge, attributes: AttributeSet,
                       selection_rule: str = "eq2_lowest_composite",
                       audit_fh: IO[str] | None = None) -> SelectionResult:
    """Pick the most informative record from every candidate cluster.

    `generate(record_id)` returns (context, learner_response) for the
    record's simulated two-turn context. All candidates in a cluster are
    scored; the pick is the argmax of informativeness (argmin of composite
    total under the default rule), ties broken by smallest record id.
    """
    if selection_rule not in ("eq2_lowest_composite", "alg1_highest_composite"):
        raise ValueError(f"unknown selection rule {selection_rule!r}")
    matrix = InformativenessMatrix()
    picks: dict[int, str] = {}
    audit_rows: list[dict] = []
    for cluster in sorted(candidates):
        ids = list(candidates[cluster])
        if not ids:
            raise ValueError(f"cluster {cluster} has no candidates")
        scored: list[tuple[str, CompositeScore]] = []
        failures: list[tuple[str, Exception]] = []
        for rid in ids:
            try:
                context, response = generate(rid)
                score = composite_score(context, response, attributes, judge)
            except Exception as e:  # record which candidate failed
                failures.append((rid, e))
                continue
            matrix.entries[(cluster, rid)] = score.informativeness
            matrix.generated[rid] = response
            matrix.per_attribute[rid] = score.per_attribute
            scored.append((rid, score))
        if not scored:
            raise ClusterScoringFailed(cluster) from (
                failures[0][1] if failures else None)
        if selection_rule == "eq2_lowest_composite":
            key = lambda item: (item[1].total, item[0])
        else:
            key = lambda item: (-item[1].total, item[0])
        pick_id = min(scored, key=key)[0]
        picks[cluster] = pick_id
        for rid, score in scored:
            audit_rows.append({
                "record_id": rid,
                "cluster": cluster,
                "generated_sha256": hashlib.sha256(
                    matrix.generated[rid].encode("utf-8")).hexdigest(),
                "scores": score.per_attribute,
                "informativeness": score.informativeness,
                "picked": rid == pick_id,
            })
    if audit_fh is not None:
        for row in audit_rows:
            audit_fh.write(json.dumps(row, sort_keys=True) + "\n")
    return SelectionResult(picks=picks, scores=matrix)


def entropy(distribution: Iterable[float]) -> float:
    """Shannon entropy (natural log) of a categorical distribution."""
    p = list(distribution)
    if not p or any(x < 0 for x in p):
        raise NotADistribution("probabilities must be non-negative")
    if abs(sum(p) - 1.0) > 1e-9:
        raise NotADistribution(f"probabilities sum to {sum(p)}")
    return -sum(x * math.log(x) for x in p if x > 0)


def random_select(candidates: Sequence[str], n: int, seed: int) -> list[str]:
    """Uniform sample without replacement, reproducible by seed."""
    ids = list(candidates)
    if n > len(ids):
        raise InsufficientCandidates(f"need {n}, have {len(ids)}")
    return random.Random(seed).sample(ids, n)
