import json
import random
import re

import pytest

from safedialog.corpus import CorpusPools, SafetyRecord
from safedialog.gateway import AuditLog, MockBackend, MockScript, RoleBindings


def make_record(i: int, keywords=None, text=None) -> SafetyRecord:
    return SafetyRecord(
        id=f"rec{i:04d}",
        image_uri=f"file:///img/{i:04d}.jpg",
        violation_text=text or f"hazard marker rec{i:04d} in the kitchen",
        source_title=f"post {i}",
        keywords=set(keywords or []),
    )


def make_pool(n: int, keywords_fn=None) -> CorpusPools:
    pools = CorpusPools()
    for i in range(n):
        kws = keywords_fn(i) if keywords_fn else []
        pools.add_record(make_record(i, keywords=kws))
    return pools


def constant_mock(text: str) -> MockBackend:
    return MockBackend(MockScript(rules=[(lambda _s: True, text)]))


_REC_RE = re.compile(r"rec\d{4}")


def scripted_judge(score_fn, attributes=("safety", "resolution", "sentiment")
                   ) -> MockBackend:
    """Judge mock: finds the record marker in the prompt, maps it to scores.

    score_fn(record_id) -> dict attribute -> value (or a scalar applied to
    all attributes).
    """

    def responder(messages):
        m = _REC_RE.search(messages[0]["content"])
        rid = m.group(0) if m else "unknown"
        scores = score_fn(rid)
        if not isinstance(scores, dict):
            scores = {a: scores for a in attributes}
        return json.dumps(scores)

    return MockBackend(MockScript(fallback=responder))


def seeded_judge_scores(seed: int, ids,
                        attributes=("safety", "resolution", "sentiment")):
    """Frozen random scores per record id, shared by system and oracle."""
    rng = random.Random(seed)
    return {rid: {a: round(rng.random(), 6) for a in attributes}
            for rid in sorted(ids)}


def mock_bindings(judge=None, pdtb="Cause, Condition", sdrt="Explanation",
                  audit: AuditLog | None = None,
                  vision="Knife on the edge of kitchen counter") -> RoleBindings:
    """All-mock role bindings with sensible scripted taggers."""
    from safedialog.gateway import RoleClient

    defaults = {
        "vision": constant_mock(vision),
        "user_simulator": MockBackend(MockScript()),  # deterministic fallback
        "judge": judge or scripted_judge(lambda rid: 0.5),
        "distiller": MockBackend(MockScript(
            fallback=lambda msgs: "Teacher advice: please move it to safety.")),
        "pdtb_tagger": constant_mock(pdtb),
        "sdrt_tagger": constant_mock(sdrt),
        "learner": MockBackend(MockScript(
            fallback=lambda msgs: "Learner reply about the concern.")),
    }
    return RoleBindings(**{
        role: RoleClient(role, backend, audit)
        for role, backend in defaults.items()
    })


@pytest.fixture
def bindings():
    return mock_bindings()
