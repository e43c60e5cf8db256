import random
import string

import pytest
from hypothesis import given, strategies as st

from safedialog import relations
from safedialog.dialogue import Conversation
from safedialog.errors import NoValidRelation, UnknownRelation
from safedialog.gateway import MockBackend, MockScript
from safedialog.relations import (
    CoherenceAnnotation,
    PdtbRelation,
    SdrtRelation,
    parse_pdtb,
    parse_sdrt,
)

from conftest import constant_mock

PDTB_CANONICAL = [
    "Concession", "Contrast", "Cause", "Cause+Belief", "Condition",
    "Purpose", "Conjunction", "Instantiation", "Level-of-detail", "Manner",
    "Substitution", "Asynchronous", "Synchronous",
]
SDRT_CANONICAL = [
    "Continuation", "Result", "Elaboration", "Conditional", "Contrast",
    "Answer", "Q-elab", "Acknowledgement", "Narration", "Correction",
    "Explanation", "Alternation", "Parallel", "Commentary",
    "Clarification Q", "Background",
]


class TestInventories:
    def test_pdtb_has_13(self):
        assert len(PdtbRelation) == 13
        assert sorted(r.display_name for r in PdtbRelation) == \
            sorted(PDTB_CANONICAL)

    def test_sdrt_has_16(self):
        assert len(SdrtRelation) == 16
        assert sorted(r.display_name for r in SdrtRelation) == \
            sorted(SDRT_CANONICAL)

    def test_pdtb_roundtrip(self):
        for rel in PdtbRelation:
            assert parse_pdtb(rel.display_name) is rel

    def test_sdrt_roundtrip(self):
        for rel in SdrtRelation:
            assert parse_sdrt(rel.display_name) is rel

    def test_documented_aliases(self):
        assert parse_sdrt("Question answer pair") is SdrtRelation.ANSWER
        assert parse_sdrt("Follow-up question") is SdrtRelation.QELAB
        assert parse_sdrt("Clarification Q") is SdrtRelation.CLARIFICATION_Q


class TestParsing:
    def test_cause(self):
        assert parse_pdtb("Cause") is PdtbRelation.CAUSE

    def test_case_normalization(self):
        assert parse_pdtb("cause+belief") is PdtbRelation.CAUSE_BELIEF

    def test_whitespace_tolerance(self):
        assert parse_pdtb("Level of Detail") is PdtbRelation.LEVEL_OF_DETAIL

    def test_out_of_inventory(self):
        with pytest.raises(UnknownRelation):
            parse_pdtb("Causation")

    def test_sdrt_background(self):
        assert parse_sdrt("Background") is SdrtRelation.BACKGROUND

    def test_sdrt_punctuation_tolerance(self):
        assert parse_sdrt("Explanation!") is SdrtRelation.EXPLANATION

    def test_fuzz_never_parses(self):
        rng = random.Random(99)
        for _ in range(2000):
            s = "".join(rng.choices(string.ascii_letters + string.digits + " -",
                                    k=rng.randint(5, 24)))
            try:
                parse_pdtb(s)
                assert s.lower().replace(" ", "") in [
                    r.display_name.lower() for r in PdtbRelation], s
            except UnknownRelation:
                pass
            try:
                parse_sdrt(s)
                pytest.fail(f"random string parsed as SDRT: {s!r}")
            except UnknownRelation:
                pass

    @given(st.text(alphabet=string.ascii_lowercase, min_size=12, max_size=30))
    def test_long_random_words_rejected(self, s):
        with pytest.raises(UnknownRelation):
            parse_pdtb(s)
        with pytest.raises(UnknownRelation):
            parse_sdrt(s)


class TestTagViolation:
    def test_scripted_tags(self):
        tagger = constant_mock("Cause, Condition")
        assert relations.tag_violation("knife on edge", tagger) == \
            [PdtbRelation.CAUSE, PdtbRelation.CONDITION]

    def test_dedup_preserves_first(self):
        tagger = constant_mock("Cause, Cause")
        assert relations.tag_violation("x", tagger) == [PdtbRelation.CAUSE]

    def test_retry_then_fail(self):
        calls = []

        def responder(messages):
            calls.append(1)
            return "Foo"

        tagger = MockBackend(MockScript(fallback=responder))
        with pytest.raises(NoValidRelation):
            relations.tag_violation("x", tagger)
        assert len(calls) == 2  # one reprompt retry

    def test_retry_succeeds(self):
        state = {"n": 0}

        def responder(messages):
            state["n"] += 1
            return "garbage" if state["n"] == 1 else "Contrast"

        tagger = MockBackend(MockScript(fallback=responder))
        assert relations.tag_violation("x", tagger) == [PdtbRelation.CONTRAST]

    def test_empty_violation_rejected(self):
        with pytest.raises(ValueError):
            relations.tag_violation("", constant_mock("Cause"))

    def test_output_subset_of_inventory(self):
        tagger = constant_mock("Cause, Wibble, Manner, Bogus")
        tags = relations.tag_violation("x", tagger)
        assert set(tags) <= set(PdtbRelation)


class TestChooseTurnRelation:
    def _history(self):
        conv = Conversation(mode="training")
        conv.append("agent", "knife on edge of counter")
        conv.append("user", "it looks fine to me")
        return conv

    def test_scripted(self):
        assert relations.choose_turn_relation(
            self._history(), constant_mock("Elaboration")) is \
            SdrtRelation.ELABORATION

    def test_tolerance(self):
        assert relations.choose_turn_relation(
            self._history(), constant_mock("Result.")) is SdrtRelation.RESULT

    def test_alias_choice(self):
        assert relations.choose_turn_relation(
            self._history(), constant_mock("Follow-up question")) is \
            SdrtRelation.QELAB

    def test_one_turn_history_rejected(self):
        conv = Conversation(mode="training")
        conv.append("agent", "only one turn")
        with pytest.raises(ValueError):
            relations.choose_turn_relation(conv, constant_mock("Result"))

    def test_retry_exhausted(self):
        with pytest.raises(NoValidRelation):
            relations.choose_turn_relation(self._history(),
                                           constant_mock("NotARelation"))


class TestAnnotationType:
    def test_requires_nonempty_tags(self):
        with pytest.raises(ValueError):
            CoherenceAnnotation([], SdrtRelation.RESULT)

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError):
            CoherenceAnnotation([PdtbRelation.CAUSE, PdtbRelation.CAUSE],
                                SdrtRelation.RESULT)

    def test_roundtrip_dict(self):
        ann = CoherenceAnnotation([PdtbRelation.CAUSE_BELIEF],
                                  SdrtRelation.CLARIFICATION_Q)
        assert CoherenceAnnotation.from_dict(ann.to_dict()) == ann
