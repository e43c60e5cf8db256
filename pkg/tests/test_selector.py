import io
import json
import math
import random

import pytest
from hypothesis import given, strategies as st

from safedialog import selector
from safedialog.errors import (
    ClusterScoringFailed,
    InsufficientCandidates,
    NotADistribution,
)
from safedialog.selector import (
    AttributeSet,
    CompositeScore,
    random_select,
    select_per_cluster,
)

from conftest import scripted_judge, seeded_judge_scores

ATTRS = AttributeSet()


def fixed_generate(rid):
    return (f"Turn 1 (agent): hazard marker {rid}", f"reply about {rid}")


class TestCompositeScore:
    def test_maximal_attributes(self):
        judge = scripted_judge(lambda rid: 1.0)
        score = selector.composite_score("Turn 1 (agent): rec0000 x",
                                         "resp", ATTRS, judge)
        assert score.total == pytest.approx(3.0)
        assert score.informativeness == pytest.approx(-3.0)

    def test_zero_attributes_most_informative(self):
        judge = scripted_judge(lambda rid: 0.0)
        score = selector.composite_score("ctx rec0000", "resp", ATTRS, judge)
        assert score.informativeness == 0.0

    def test_clamping(self):
        judge = scripted_judge(
            lambda rid: {"safety": 1.7, "resolution": -0.3, "sentiment": 0.5})
        score = selector.composite_score("ctx rec0000", "resp", ATTRS, judge)
        assert score.per_attribute == {"safety": 1.0, "resolution": 0.0,
                                      "sentiment": 0.5}

    def test_empty_response_rejected(self):
        with pytest.raises(ValueError):
            selector.composite_score("ctx", "", ATTRS,
                                     scripted_judge(lambda rid: 0.5))

    def test_informativeness_is_negated_total(self):
        score = CompositeScore.from_attributes({"a": 0.25, "b": 0.5})
        assert score.informativeness == -score.total == -0.75


class TestSelectPerCluster:
    def test_matches_exhaustive_oracle(self):
        ids = [f"rec{i:04d}" for i in range(6)]
        scores = seeded_judge_scores(42, ids)
        judge = scripted_judge(lambda rid: scores[rid])
        candidates = {0: ids[:3], 1: ids[3:]}
        result = select_per_cluster(candidates, fixed_generate, judge, ATTRS)
        for cluster, members in candidates.items():
            expected = min(members,
                           key=lambda r: (sum(scores[r].values()), r))
            assert result.picks[cluster] == expected

    def test_tie_break_smallest_id(self):
        judge = scripted_judge(lambda rid: 0.4)
        result = select_per_cluster({0: ["rec0003", "rec0001", "rec0002"]},
                                    fixed_generate, judge, ATTRS)
        assert result.picks[0] == "rec0001"

    def test_single_candidate_forced(self):
        judge = scripted_judge(lambda rid: 0.9)
        result = select_per_cluster({0: ["rec0009"], 1: ["rec0001"]},
                                    fixed_generate, judge, ATTRS)
        assert result.picks == {0: "rec0009", 1: "rec0001"}

    def test_permutation_invariance(self):
        ids = [f"rec{i:04d}" for i in range(5)]
        scores = seeded_judge_scores(7, ids)
        judge = scripted_judge(lambda rid: scores[rid])
        r1 = select_per_cluster({0: ids}, fixed_generate, judge, ATTRS)
        shuffled = list(ids)
        random.Random(3).shuffle(shuffled)
        r2 = select_per_cluster({0: shuffled}, fixed_generate, judge, ATTRS)
        assert r1.picks == r2.picks

    def test_constant_shift_leaves_pick(self):
        ids = [f"rec{i:04d}" for i in range(4)]
        base = seeded_judge_scores(11, ids)
        shifted = {rid: {a: min(1.0, v + 0.1) for a, v in sc.items()}
                   for rid, sc in base.items()}
        # keep the shift exact by staying inside [0, 0.9] first
        base = {rid: {a: v * 0.9 for a, v in sc.items()}
                for rid, sc in base.items()}
        shifted = {rid: {a: v + 0.05 for a, v in sc.items()}
                   for rid, sc in base.items()}
        r1 = select_per_cluster({0: ids}, fixed_generate,
                                scripted_judge(lambda r: base[r]), ATTRS)
        r2 = select_per_cluster({0: ids}, fixed_generate,
                                scripted_judge(lambda r: shifted[r]), ATTRS)
        assert r1.picks == r2.picks

    def test_alg1_rule_inverts(self):
        ids = ["rec0000", "rec0001"]
        scores = {"rec0000": 0.1, "rec0001": 0.9}
        judge = scripted_judge(lambda rid: scores[rid])
        low = select_per_cluster({0: ids}, fixed_generate, judge, ATTRS)
        high = select_per_cluster({0: ids}, fixed_generate, judge, ATTRS,
                                  selection_rule="alg1_highest_composite")
        assert low.picks[0] == "rec0000"
        assert high.picks[0] == "rec0001"

    def test_cluster_scoring_failed(self):
        def broken_generate(rid):
            raise RuntimeError("backend down")

        with pytest.raises(ClusterScoringFailed):
            select_per_cluster({0: ["rec0000"]}, broken_generate,
                               scripted_judge(lambda r: 0.5), ATTRS)

    def test_audit_log_rows(self):
        ids = ["rec0000", "rec0001"]
        judge = scripted_judge(lambda rid: 0.5)
        buf = io.StringIO()
        result = select_per_cluster({0: ids}, fixed_generate, judge, ATTRS,
                                    audit_fh=buf)
        rows = [json.loads(line) for line in buf.getvalue().splitlines()]
        assert len(rows) == 2
        assert sum(r["picked"] for r in rows) == 1
        assert {r["record_id"] for r in rows} == set(ids)
        assert all(set(r) >= {"cluster", "generated_sha256", "scores",
                              "informativeness"} for r in rows)

    def test_matrix_entries_belong_to_clusters(self):
        ids = [f"rec{i:04d}" for i in range(4)]
        judge = scripted_judge(lambda rid: 0.5)
        result = select_per_cluster({0: ids[:2], 1: ids[2:]},
                                    fixed_generate, judge, ATTRS)
        for (cluster, rid) in result.scores.entries:
            assert rid in (ids[:2] if cluster == 0 else ids[2:])


class TestEntropy:
    def test_one_hot(self):
        assert selector.entropy([1.0, 0.0, 0.0]) == 0.0

    def test_uniform_four(self):
        assert selector.entropy([0.25] * 4) == pytest.approx(math.log(4),
                                                             abs=1e-12)

    def test_hand_computed(self):
        # -(0.5 ln 0.5 + 2 * 0.25 ln 0.25)
        assert selector.entropy([0.5, 0.25, 0.25]) == pytest.approx(
            1.039721, abs=1e-6)

    def test_not_a_distribution(self):
        with pytest.raises(NotADistribution):
            selector.entropy([0.5, 0.6])
        with pytest.raises(NotADistribution):
            selector.entropy([-0.1, 1.1])
        with pytest.raises(NotADistribution):
            selector.entropy([])

    @given(st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=1,
                    max_size=12))
    def test_bounded_by_log_n(self, weights):
        total = sum(weights)
        p = [w / total for w in weights]
        h = selector.entropy(p)
        assert h <= math.log(len(p)) + 1e-9
        if all(abs(x - 1 / len(p)) < 1e-12 for x in p):
            assert h == pytest.approx(math.log(len(p)), abs=1e-9)


class TestRandomSelect:
    def test_full_selection(self):
        ids = [f"r{i}" for i in range(5)]
        assert set(random_select(ids, 5, seed=1)) == set(ids)

    def test_determinism(self):
        ids = [f"r{i}" for i in range(20)]
        assert random_select(ids, 7, seed=3) == random_select(ids, 7, seed=3)

    def test_insufficient(self):
        with pytest.raises(InsufficientCandidates):
            random_select(["a"], 2, seed=0)

    def test_uniform_frequency(self):
        ids = [f"r{i}" for i in range(10)]
        counts = {rid: 0 for rid in ids}
        for seed in range(10000):
            counts[random_select(ids, 1, seed=seed)[0]] += 1
        for rid in ids:
            assert abs(counts[rid] / 10000 - 0.1) < 0.02
