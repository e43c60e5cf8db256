"""Active-learning loop: cluster once, then iteratively select, tag, distill,
accumulate the labeled set, and retrain the learner until the budget is spent.

The loop runs exactly floor(B/N) iterations (a literal while-nonnegative
rule is available behind `literal_while` for fidelity experiments only,
since it overshoots the budget by one batch). Iterations
are atomic: the labeled pool only ever contains complete iterations.
"""
from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field
from typing import IO

from . import dialogue, vectorspace
from .corpus import CorpusPools, DatasetSplit, SafetyRecord
from .errors import InsufficientPool
from .relations import CoherenceAnnotation
from .selector import AttributeSet, select_per_cluster


@dataclass
class LoopConfig:
    budget_B: int
    batch_N: int
    clusters_m: int
    attributes: AttributeSet = field(default_factory=AttributeSet)
    seed: int = 0
    selection_rule: str = "eq2_lowest_composite"
    literal_while: bool = False
    embed_dim: int = 256
    n_init: int = 10
    max_iter: int = 300
    tol: float = 1e-4
    # opaque parameters forwarded to the training endpoint, never interpreted
    training_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.budget_B < 1 or self.batch_N < 1 or self.clusters_m < 1:
            raise ValueError("budget, batch size and cluster count must be >= 1")
        if self.batch_N != self.clusters_m:
            raise ValueError("batch_N must equal clusters_m "
                             "(one pick per cluster per iteration)")
        if self.budget_B < self.batch_N:
            raise ValueError("budget_B must be >= batch_N")

    def to_dict(self) -> dict:
        return {
            "budget_B": self.budget_B,
            "batch_N": self.batch_N,
            "clusters_m": self.clusters_m,
            "attributes": list(self.attributes),
            "seed": self.seed,
            "selection_rule": self.selection_rule,
            "literal_while": self.literal_while,
            "embed_dim": self.embed_dim,
            "n_init": self.n_init,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "training_params": self.training_params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LoopConfig":
        d = dict(d)
        attrs = d.pop("attributes", None)
        if attrs:
            d["attributes"] = AttributeSet(tuple(attrs))
        return cls(**d)


@dataclass
class LabeledExample:
    """A selected record with its coherence annotation and teacher dialogue."""

    record: SafetyRecord
    annotation: CoherenceAnnotation
    teacher_dialogue: dialogue.Conversation
    iteration: int

    def __post_init__(self):
        if self.teacher_dialogue.mode != "training":
            raise ValueError("teacher dialogue must be in training mode")

    def to_dict(self) -> dict:
        return {
            "record_id": self.record.id,
            "annotation": self.annotation.to_dict(),
            "teacher_dialogue": self.teacher_dialogue.to_dict(),
            "iteration": self.iteration,
        }


class MockLearner:
    """Deterministic stand-in for the fine-tuning endpoint."""

    def __init__(self):
        self.version = 0
        self.fit_history: list[list[str]] = []

    def fine_tune(self, labeled: list[LabeledExample]) -> int:
        self.fit_history.append([ex.record.id for ex in labeled])
        self.version += 1
        return self.version


class HttpLearner:
    """Delegates fine-tuning to an external training endpoint."""

    def __init__(self, endpoint: str, session=None, training_params=None):
        import requests
        self.endpoint = endpoint
        self.version = 0
        self.training_params = training_params or {}
        self._session = session or requests.Session()

    def fine_tune(self, labeled: list[LabeledExample]) -> int:
        payload = {
            "examples": [ex.to_dict() for ex in labeled],
            "params": self.training_params,
        }
        resp = self._session.post(self.endpoint, json=payload, timeout=600)
        resp.raise_for_status()
        self.version += 1
        return self.version


@dataclass
class LoopState:
    iteration: int = 0
    remaining_budget: int = 0
    labeled_count: int = 0
    per_iteration_log: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "remaining_budget": self.remaining_budget,
            "labeled_count": self.labeled_count,
            "per_iteration_log": self.per_iteration_log,
        }


def _write_checkpoint(path: str, config: LoopConfig, state: LoopState,
                      labeled: list[LabeledExample], learner_version: int):
    payload = {
        "config": config.to_dict(),
        "state": state.to_dict(),
        "labeled_ids": [ex.record.id for ex in labeled],
        "labeled_examples": [ex.to_dict() for ex in labeled],
        "learner_version": learner_version,
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def run_loop(pools: CorpusPools, config: LoopConfig, bindings, learner,
             checkpoint_dir: str | None = None,
             selection_audit_fh: IO[str] | None = None,
             embedder=None, on_iteration=None) -> LoopState:
    """Run the full clustering-based active-learning procedure."""
    bindings.validate()
    eligible = pools.eligible_unlabeled()
    if len(eligible) < config.budget_B:
        raise InsufficientPool(
            f"budget {config.budget_B} exceeds eligible pool {len(eligible)}")

    embedder = embedder or vectorspace.HashingEmbedder(dim=config.embed_dim)
    ids = [r.id for r in eligible]
    vectors = vectorspace.embed([r.effective_text() for r in eligible],
                                embedder)
    model = vectorspace.kmeans(vectors, m=config.clusters_m, seed=config.seed,
                               ids=ids, n_init=config.n_init,
                               max_iter=config.max_iter, tol=config.tol)
    # clustered once up front; selected records leave their candidate set but
    # centroids are never recomputed
    candidates = {c: list(members) for c, members in model.members().items()}

    iterations = config.budget_B // config.batch_N
    if config.literal_while:
        iterations += 1

    state = LoopState(iteration=0, remaining_budget=config.budget_B,
                      labeled_count=0)

    def generate(rid: str):
        conv, response = dialogue.build_scoring_context(pools.get(rid),
                                                        bindings)
        return conv.render(), response

    for it in range(1, iterations + 1):
        active = {c: ids_ for c, ids_ in candidates.items() if ids_}
        if not active:
            break
        result = select_per_cluster(
            active, generate, bindings.judge, config.attributes,
            selection_rule=config.selection_rule,
            audit_fh=selection_audit_fh)
        # stage the whole iteration before touching the pools
        staged: list[LabeledExample] = []
        for cluster in sorted(result.picks):
            rid = result.picks[cluster]
            record = pools.get(rid)
            conv, annotation = dialogue.run_training_dialogue(
                record, bindings, use_distiller=True)
            staged.append(LabeledExample(record=record, annotation=annotation,
                                         teacher_dialogue=conv, iteration=it))
        for example, cluster in zip(staged, sorted(result.picks)):
            pools.move_to_labeled(example)
            candidates[cluster].remove(example.record.id)

        version = learner.fine_tune(list(pools.labeled))
        picked = len(staged)
        state.iteration = it
        state.labeled_count += picked
        state.remaining_budget = config.budget_B - state.labeled_count
        infos = sorted(result.scores.entries[(c, result.picks[c])]
                       for c in result.picks)
        state.per_iteration_log.append({
            "iteration": it,
            "picks": {str(c): result.picks[c] for c in sorted(result.picks)},
            "scores_summary": {
                "min": infos[0],
                "max": infos[-1],
                "mean": sum(infos) / len(infos),
            },
            "learner_version": version,
        })
        if checkpoint_dir:
            _write_checkpoint(
                os.path.join(checkpoint_dir, f"checkpoint_{it:03d}.json"),
                config, state, pools.labeled, version)
        if on_iteration is not None:
            on_iteration(state)
    return state


def build_mcodal_split(pools: CorpusPools, config: LoopConfig, bindings,
                       learner, **kwargs) -> DatasetSplit:
    """Run the loop and expose the labeled ids, in selection order, as a split."""
    run_loop(pools, config, bindings, learner, **kwargs)
    return DatasetSplit("mcodal", [ex.record.id for ex in pools.labeled],
                        config.seed)


def build_coherence_split(pools: CorpusPools, n: int, seed: int,
                          bindings) -> list[LabeledExample]:
    """Tag and distill n randomly chosen records: no clustering, no selection."""
    eligible = pools.eligible_unlabeled()
    if n > len(eligible):
        raise InsufficientPool(f"need {n}, have {len(eligible)}")
    chosen = random.Random(seed).sample([r.id for r in eligible], n)
    examples = []
    for rid in chosen:
        record = pools.get(rid)
        conv, annotation = dialogue.run_training_dialogue(
            record, bindings, use_distiller=True)
        examples.append(LabeledExample(record=record, annotation=annotation,
                                       teacher_dialogue=conv, iteration=0))
    return examples
