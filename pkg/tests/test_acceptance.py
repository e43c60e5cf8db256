"""Acceptance gate: one test per shipped guarantee, each printing PASS/FAIL.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
Everything here runs against deterministic mock backends only.
"""
import json
import math
import random
import string
import threading
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
import requests as requests_lib

from safedialog import corpus as corpus_mod
from safedialog import vectorspace
from safedialog.corpus import DatasetSplit, cohen_kappa, ingest_records
from safedialog.dialogue import Conversation, SessionManager, \
    run_training_dialogue
from safedialog.errors import UnknownRelation
from safedialog.evaluator import aggregate_report, evaluate_split
from safedialog.gateway import AuditLog
from safedialog.loop import LoopConfig, MockLearner, run_loop
from safedialog.relations import (
    PDTB_ALIASES,
    SDRT_ALIASES,
    PdtbRelation,
    SdrtRelation,
    parse_pdtb,
    parse_sdrt,
)
from safedialog.selector import AttributeSet, random_select, select_per_cluster
from safedialog.service import create_app

from conftest import make_pool, make_record, mock_bindings, scripted_judge, \
    seeded_judge_scores

ATTRS = AttributeSet()


@contextmanager
def criterion(n: int, title: str):
    try:
        yield
    except BaseException:
        print(f"criterion {n:2d} FAIL  {title}", flush=True)
        raise
    print(f"criterion {n:2d} PASS  {title}", flush=True)


def test_01_selection_matches_exhaustive_oracle():
    with criterion(1, "per-cluster selection equals exhaustive argmin oracle"):
        ids = [f"rec{i:04d}" for i in range(60)]
        for seed in range(100):
            rng = random.Random(seed)
            shuffled = rng.sample(ids, len(ids))
            clusters = {c: shuffled[c::6] for c in range(6)}
            scores = seeded_judge_scores(seed, ids)
            judge = scripted_judge(lambda rid: scores[rid])
            result = select_per_cluster(
                clusters,
                generate=lambda rid: (f"scene with hazard marker {rid}",
                                      f"agent response about {rid}"),
                judge=judge, attributes=ATTRS)
            oracle = {c: min(members,
                             key=lambda r: (sum(scores[r].values()), r))
                      for c, members in clusters.items()}
            assert result.picks == oracle, f"seed {seed}"


def test_02_loop_accounting_b200_n50_m50():
    with criterion(2, "budget accounting: B=200 N=50 m=50 over 500 records"):
        pools = corpus_mod.CorpusPools()
        for i in range(500):
            topic = " ".join([f"topic{i % 50:02d}"] * 12)
            pools.add_record(make_record(
                i, text=f"{topic} hazard marker rec{i:04d}"))
        ids = [r.id for r in pools.unlabeled]
        scores = seeded_judge_scores(7, ids)
        bindings = mock_bindings(judge=scripted_judge(lambda r: scores[r]))
        config = LoopConfig(budget_B=200, batch_N=50, clusters_m=50, seed=0,
                            embed_dim=256, n_init=4)
        learner = MockLearner()
        before = len(pools.eligible_unlabeled())
        state = run_loop(pools, config, bindings, learner)
        assert state.iteration == 4
        assert state.labeled_count == 200
        assert len(pools.labeled) == 200
        assert learner.version == 4
        labeled_ids = [ex.record.id for ex in pools.labeled]
        assert len(set(labeled_ids)) == 200
        assert len(pools.eligible_unlabeled()) == before - 200


def test_03_clustered_selection_covers_more_keywords():
    with criterion(3, "clustered 200-record split beats random on keyword "
                      "coverage (Zipf-skewed pool)"):
        keywords = [f"kw{k:02d}" for k in range(30)]
        weights = [1.0 / (k + 1) ** 1.2 for k in range(30)]
        wins = strict = 0
        for trial in range(100):
            rng = random.Random(trial)
            kw_of = {}
            texts = []
            ids = []
            for i in range(500):
                kw = rng.choices(keywords, weights=weights)[0]
                rid = f"rec{i:04d}"
                kw_of[rid] = kw
                ids.append(rid)
                texts.append(f"{kw} {kw} {kw} {kw} hazard item {i}")
            vectors = vectorspace.embed(
                texts, vectorspace.HashingEmbedder(dim=64))
            model = vectorspace.kmeans(vectors, m=200, seed=trial, ids=ids,
                                       n_init=1, max_iter=50)
            clustered = [rng.choice(sorted(members))
                         for members in model.members().values()]
            randomized = random_select(ids, 200, seed=trial)
            cov_c = len({kw_of[r] for r in clustered})
            cov_r = len({kw_of[r] for r in randomized})
            wins += cov_c >= cov_r
            strict += cov_c > cov_r
        assert wins >= 80, f"clustered >= random in only {wins}/100 trials"
        assert strict >= 50, f"strictly greater in only {strict}/100 trials"


def test_04_kmeans_recovers_two_blobs():
    with criterion(4, "k-means separates 10-sigma blobs; objective "
                      "non-increasing"):
        recovered = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            a = rng.normal(0.0, 1.0, size=(50, 4))
            b = rng.normal(0.0, 1.0, size=(50, 4))
            b[:, 0] += 10.0
            points = np.vstack([a, b])
            model = vectorspace.kmeans(points, m=2, seed=seed, n_init=2)
            history = model.inertia_history
            assert all(later <= earlier + 1e-9
                       for earlier, later in zip(history, history[1:]))
            labels = [model.assignment[str(i)] for i in range(100)]
            first, second = set(labels[:50]), set(labels[50:])
            if len(first) == len(second) == 1 and first != second:
                recovered += 1
        assert recovered >= 99, f"recovered only {recovered}/100 seeds"


def test_05_relation_inventories_closed():
    with criterion(5, "13+16 relation names and aliases round-trip; fuzzed "
                      "strings rejected"):
        assert len(PdtbRelation) == 13 and len(SdrtRelation) == 16
        for rel in PdtbRelation:
            assert parse_pdtb(rel.value) is rel
            assert parse_pdtb(rel.value.upper()) is rel
        for rel in SdrtRelation:
            assert parse_sdrt(rel.value) is rel
            assert parse_sdrt(rel.value.lower()) is rel
        for alias, rel in SDRT_ALIASES.items():
            assert parse_sdrt(alias) is rel
        for alias, rel in PDTB_ALIASES.items():
            assert parse_pdtb(alias) is rel

        known = {"".join(ch for ch in name.lower() if ch.isalnum())
                 for name in ([r.value for r in PdtbRelation]
                              + [r.value for r in SdrtRelation]
                              + list(SDRT_ALIASES) + list(PDTB_ALIASES))}
        rng = random.Random(0)
        alphabet = string.ascii_letters + string.digits + " -+/._"
        for _ in range(10_000):
            s = "".join(rng.choices(alphabet, k=rng.randint(1, 20)))
            if "".join(ch for ch in s.lower() if ch.isalnum()) in known:
                continue  # astronomically unlikely, but keep the oracle exact
            with pytest.raises(UnknownRelation):
                parse_pdtb(s)
            with pytest.raises(UnknownRelation):
                parse_sdrt(s)


def test_06_dialogue_protocol_shapes():
    with criterion(6, "1000 training dialogues are 4-turn a/u/a/u; 1000-step "
                      "deployment session alternates"):
        bindings = mock_bindings()
        for i in range(1000):
            conv, annotation = run_training_dialogue(make_record(i), bindings)
            assert [t.speaker for t in conv.turns] == \
                ["agent", "user", "agent", "user"]
            assert len(conv.turns) == 4
            assert annotation.sdrt_choice is not None
            assert conv.turns[2].sdrt is annotation.sdrt_choice

        mgr = SessionManager(mock_bindings())
        state = mgr.start_session(b"\x01\x02\x03")
        for i in range(1000):
            mgr.advance_session(state.session_id, f"user turn {i}")
        turns = state.conversation.turns
        assert len(turns) == 2001
        assert turns[0].speaker == "agent"
        assert all(x.speaker != y.speaker for x, y in zip(turns, turns[1:]))
        assert [t.index for t in turns] == list(range(1, 2002))


def _kappa_closed_form(table: np.ndarray) -> float:
    n = table.sum()
    po = np.trace(table) / n
    pe = float((table.sum(axis=1) * table.sum(axis=0)).sum()) / n ** 2
    if pe == 1.0:
        return 1.0 if po == 1.0 else 0.0
    return (po - pe) / (1 - pe)


def test_07_cohen_kappa_matches_closed_form():
    with criterion(7, "Cohen's kappa matches the contingency-table closed "
                      "form"):
        rng = random.Random(11)
        for _ in range(50):
            k = rng.randint(2, 5)
            table = np.array([[rng.randint(0, 20) for _ in range(k)]
                              for _ in range(k)])
            if table.sum() == 0:
                table[0][0] = 1
            a, b = [], []
            for i in range(k):
                for j in range(k):
                    a += [f"l{i}"] * table[i][j]
                    b += [f"l{j}"] * table[i][j]
            assert cohen_kappa(a, b) == \
                pytest.approx(_kappa_closed_form(table), abs=1e-12)

        identical = [f"l{i % 3}" for i in range(30)]
        assert cohen_kappa(identical, list(identical)) == 1.0

        table = np.array([[40, 10], [10, 40]])
        a = ["x"] * 50 + ["y"] * 50
        b = ["x"] * 40 + ["y"] * 10 + ["x"] * 10 + ["y"] * 40
        assert cohen_kappa(a, b) == pytest.approx(0.6, abs=1e-12)


def test_08_evaluator_columns_are_scaled_means():
    with criterion(8, "report columns equal 100x per-dialogue means; known "
                      "triple renders 51.98/52.36/82.03"):
        rng = random.Random(3)
        conv = Conversation(mode="deployment")
        conv.append("agent", "careful with that")
        conv.append("user", "ok")
        for _ in range(20):
            n = rng.randint(1, 12)
            per_dialogue = [
                {"record_id": f"r{i}",
                 **{a: rng.random() for a in ATTRS}}
                for i in range(n)]
            report = aggregate_report("m", per_dialogue, [conv] * n, ATTRS)
            for a in ATTRS:
                expect = 100.0 * sum(d[a] for d in per_dialogue) / n
                assert getattr(report.metrics, a) == \
                    pytest.approx(expect, abs=1e-9)

        triple = {"sentiment": 0.5198, "resolution": 0.5236, "safety": 0.8203}
        report = aggregate_report(
            "learner", [{"record_id": "r", **triple}] * 3, [conv] * 3, ATTRS)
        assert report.metrics.sentiment == pytest.approx(51.98, abs=1e-9)
        assert report.metrics.resolution == pytest.approx(52.36, abs=1e-9)
        assert report.metrics.safety == pytest.approx(82.03, abs=1e-9)
        table = report.to_table()
        for cell in ("51.98", "52.36", "82.03"):
            assert cell in table


def _pipeline_once(base: Path) -> dict[str, bytes]:
    """Ingest -> split -> loop -> evaluate with mocks; return artifact bytes."""
    base.mkdir(parents=True, exist_ok=True)
    records = base / "records.jsonl"
    with open(records, "w", encoding="utf-8") as fh:
        for i in range(40):
            fh.write(json.dumps({
                "id": f"rec{i:04d}",
                "image_uri": f"file:///img/{i:04d}.jpg",
                "violation_text": f"hazard marker rec{i:04d} near the stove",
                "keywords": [f"kw{i % 6}"],
            }, sort_keys=True) + "\n")
    with open(records, encoding="utf-8") as fh:
        pools = ingest_records(fh).pools

    ids = [r.id for r in pools.unlabeled]
    scores = seeded_judge_scores(19, ids)
    audit_fh = open(base / "audit.jsonl", "w", encoding="utf-8")
    selection_fh = open(base / "selection.jsonl", "w", encoding="utf-8")
    bindings = mock_bindings(judge=scripted_judge(lambda r: scores[r]),
                             audit=AuditLog(audit_fh))

    splits = corpus_mod.build_basic_splits(pools, {"train": 10, "test": 6},
                                           seed=5)
    split_path = base / "test_split.json"
    split_path.write_text(json.dumps(
        {"name": splits["test"].name, "record_ids": splits["test"].record_ids,
         "seed": splits["test"].seed}, sort_keys=True))

    config = LoopConfig(budget_B=8, batch_N=4, clusters_m=4, seed=3,
                        embed_dim=64, n_init=2)
    ck = base / "ck"
    ck.mkdir()
    run_loop(pools, config, bindings, MockLearner(), checkpoint_dir=str(ck),
             selection_audit_fh=selection_fh)

    report = evaluate_split(splits["test"], pools, bindings, ATTRS)
    (base / "report.json").write_text(report.to_json())
    audit_fh.close()
    selection_fh.close()

    out = {p.name: p.read_bytes()
           for p in (split_path, base / "audit.jsonl",
                     base / "selection.jsonl", base / "report.json")}
    for p in sorted(ck.iterdir()):
        out[p.name] = p.read_bytes()
    return out


def test_09_end_to_end_determinism(tmp_path):
    with criterion(9, "two identical mock runs produce byte-identical "
                      "artifacts"):
        first = _pipeline_once(tmp_path / "run1")
        second = _pipeline_once(tmp_path / "run2")
        assert first.keys() == second.keys()
        assert {"checkpoint_001.json", "checkpoint_002.json"} <= first.keys()
        for name in first:
            assert first[name] == second[name], f"{name} differs between runs"


def _start_server(app):
    import uvicorn
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    return server, thread, f"http://127.0.0.1:{port}"


def test_10_service_contract_live():
    with criterion(10, "live HTTP service honors the session, annotation, "
                       "and loop-job contracts"):
        import base64
        pools = make_pool(10)
        ids = [r.id for r in pools.unlabeled]
        scores = seeded_judge_scores(23, ids)
        bindings = mock_bindings(judge=scripted_judge(lambda r: scores[r]))
        app = create_app(pools, bindings, None)
        server, thread, url = _start_server(app)
        try:
            img = base64.b64encode(b"\x01\x02\x03").decode()
            resp = requests_lib.post(f"{url}/sessions", json={"image": img})
            assert resp.status_code == 201
            sid = resp.json()["session_id"]
            reply = requests_lib.post(f"{url}/sessions/{sid}/messages",
                                      json={"text": "why is that unsafe?"})
            assert reply.status_code == 200
            assert reply.json()["turn_index"] == 3
            assert requests_lib.delete(f"{url}/sessions/{sid}") \
                .status_code == 200

            # annotation race: exactly one of two simultaneous decisions wins
            results = []

            def decide(decision):
                results.append(requests_lib.post(
                    f"{url}/annotations/rec0000",
                    json={"decision": decision}).status_code)

            threads = [threading.Thread(target=decide, args=(d,))
                       for d in ("correct", "discard")]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert sorted(results) == [200, 409]
            assert requests_lib.get(f"{url}/annotations/queue") \
                .json()["items"]

            # loop jobs: one active at a time, and the job completes
            loop_config = {"budget_B": 4, "batch_N": 2, "clusters_m": 2,
                           "seed": 0, "embed_dim": 64, "n_init": 2}
            first = requests_lib.post(f"{url}/loop/run", json=loop_config)
            assert first.status_code == 202
            second = requests_lib.post(f"{url}/loop/run", json=loop_config)
            assert second.status_code in (202, 409)
            deadline = time.time() + 30
            while time.time() < deadline:
                body = requests_lib.get(
                    f"{url}/loop/{first.json()['job_id']}").json()
                if body["status"] != "running":
                    break
                time.sleep(0.05)
            assert body["status"] == "done"
            assert body["state"]["iteration"] == 2
            assert requests_lib.get(f"{url}/loop/nope").status_code == 404
        finally:
            server.should_exit = True
            thread.join(timeout=5)
