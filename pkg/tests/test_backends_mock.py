from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from storyloom.backends import (
    ContractViolationError,
    GenParams,
    MockBackend,
    load_edit_table,
    load_entail_table,
    load_qa_table,
    make_verdict,
    relevance,
)
from storyloom.textutil import norm_phrase


class TestComplete:
    def test_deterministic_across_instances(self):
        prompt = "Once there was a town.\n\nFull text below:\nChapter 1"
        a = MockBackend(seed=3).complete(prompt, GenParams(max_tokens=40, num_samples=4))
        b = MockBackend(seed=3).complete(prompt, GenParams(max_tokens=40, num_samples=4))
        assert a == b

    def test_seed_changes_output(self):
        prompt = "Once there was a town.\n\nFull text below:\nChapter 1"
        a = MockBackend(seed=1).complete(prompt, GenParams(max_tokens=40))
        b = MockBackend(seed=2).complete(prompt, GenParams(max_tokens=40))
        assert a != b

    def test_sample_count(self, mock_backend):
        out = mock_backend.complete("tell a story", GenParams(max_tokens=16, num_samples=10))
        assert len(out) == 10

    def test_sample_prefix_stable_under_num_samples(self, mock_backend):
        """Sample i depends only on (seed, prompt, i), not on how many are drawn."""
        one = mock_backend.complete("tell a story", GenParams(max_tokens=16, num_samples=1))
        many = mock_backend.complete("tell a story", GenParams(max_tokens=16, num_samples=6))
        assert many[0] == one[0]

    def test_max_tokens_respected(self, mock_backend):
        out = mock_backend.complete("tell a story", GenParams(max_tokens=25, num_samples=3))
        assert all(mock_backend.count_tokens(t) <= 25 for t in out)

    def test_stop_sequences_removed(self, mock_backend):
        out = mock_backend.complete(
            "Premise: x\n\nSetting: y\n\nCharacters:\n1. z\n\n"
            "List the major plot points of the story as a numbered outline.\n\nOutline:",
            GenParams(max_tokens=64, stop_sequences=("\n\n",)),
        )[0]
        assert "\n\n" not in out

    def test_context_overflow_is_contract_violation(self):
        backend = MockBackend(seed=0, context_limit=10)
        with pytest.raises(ContractViolationError):
            backend.complete("a " * 9, GenParams(max_tokens=5))


class TestInsert:
    def test_bridge_excludes_suffix(self, mock_backend):
        bridge = mock_backend.insert("A.", "Z.", GenParams(max_tokens=32))
        assert "Z." not in bridge
        assert bridge

    def test_deterministic(self):
        a = MockBackend(seed=5).insert("The story neared its close.", "The End.",
                                       GenParams(max_tokens=32))
        b = MockBackend(seed=5).insert("The story neared its close.", "The End.",
                                       GenParams(max_tokens=32))
        assert a == b

    def test_empty_prefix_rejected(self, mock_backend):
        with pytest.raises(ValueError):
            mock_backend.insert("", "The End.", GenParams(max_tokens=8))


class TestEdit:
    def test_table_hit(self):
        backend = MockBackend(
            seed=0,
            edit_table={(norm_phrase("the old text"), norm_phrase("fix it")): "the new text"},
        )
        assert backend.edit("The old text.", "Fix it") == "the new text"

    def test_wildcard_hit(self):
        backend = MockBackend(
            seed=0, edit_table={("*", norm_phrase("fix it")): "replacement"}
        )
        assert backend.edit("anything at all", "fix it") == "replacement"

    def test_unknown_instruction_is_identity(self, mock_backend):
        assert mock_backend.edit("some text", "do nothing known") == "some text"

    def test_empty_instruction_rejected(self, mock_backend):
        with pytest.raises(ValueError):
            mock_backend.edit("text", "  ")


class TestEmbed:
    def test_self_similarity_maximal(self, mock_backend):
        texts = ["red apple", "red apple tree", "blue car", "green bicycle"]
        vectors = mock_backend.embed(texts)
        self_score = relevance(vectors[0], vectors[0])
        assert all(relevance(vectors[0], v) <= self_score + 1e-12 for v in vectors)

    def test_bag_of_words_overlap_ranks_higher(self, mock_backend):
        query, close, far = mock_backend.embed(["red apple", "red apple tree", "blue car"])
        assert relevance(query, close) > relevance(query, far)

    def test_unit_vectors(self, mock_backend):
        for v in mock_backend.embed(["one two three", "four"]):
            assert np.isclose(np.linalg.norm(v), 1.0)

    def test_empty_list_rejected(self, mock_backend):
        with pytest.raises(ValueError):
            mock_backend.embed([])


class TestEntail:
    def test_identical_strings_entail(self, mock_backend):
        verdict = mock_backend.entail("Ada is tall.", "Ada is tall.")
        assert verdict.top() == "entail"

    def test_table_entry(self):
        backend = MockBackend(
            seed=0,
            entail_table={
                (norm_phrase("A is B."), norm_phrase("A is C.")): make_verdict("contradict", 0.95)
            },
        )
        verdict = backend.entail("A is B.", "A is C.")
        assert verdict.p_contradict == pytest.approx(0.95)

    def test_default_is_neutral(self, mock_backend):
        verdict = mock_backend.entail("The sky is wide.", "Soup is warm.")
        assert verdict.top() == "neutral"

    def test_probabilities_sum_to_one(self, mock_backend):
        v = mock_backend.entail("a b", "c d")
        assert v.p_entail + v.p_neutral + v.p_contradict == pytest.approx(1.0)


class TestAnswer:
    def test_table_hit(self):
        from storyloom.backends import QAResult

        backend = MockBackend(
            seed=0, qa_table={norm_phrase("What is Ada's age?"): QAResult("forty", 0.9)}
        )
        result = backend.answer("What is Ada's age?", "Ada is forty.")
        assert (result.answer, result.confidence) == ("forty", 0.9)

    def test_miss_abstains(self, mock_backend):
        result = mock_backend.answer("What is the moon?", "Some context.")
        assert result.abstained and result.confidence == 0.0

    def test_empty_question_rejected(self, mock_backend):
        with pytest.raises(ValueError):
            mock_backend.answer("", "context")


class TestDetectEntities:
    def test_mid_sentence_name(self, mock_backend):
        found = mock_backend.detect_entities("They met Lucy at the market.")
        assert found == [("Lucy", True)]

    def test_non_person_lexicon(self):
        backend = MockBackend(seed=0, non_person_lexicon=("Microsoft Word",))
        found = backend.detect_entities("She opened Microsoft Word.")
        assert found == [("Microsoft Word", False)]

    def test_no_capitals(self, mock_backend):
        assert mock_backend.detect_entities("the cat slept.") == []

    def test_sentence_initial_run_excluded(self, mock_backend):
        found = mock_backend.detect_entities("Mira Holloway waved. They saw Mira Holloway.")
        assert found == [("Mira Holloway", True)]

    def test_distinct_surfaces(self, mock_backend):
        found = mock_backend.detect_entities(
            "They saw Wren Calloway twice. Later they met Wren Calloway again."
        )
        assert [name for name, _ in found] == ["Wren Calloway"]


class TestTokenizer:
    def test_count_empty(self, mock_backend):
        assert mock_backend.count_tokens("") == 0

    def test_truncate_keeps_suffix(self, mock_backend):
        assert mock_backend.truncate_left("a b c d", 2) == "c d"

    def test_truncate_noop_under_budget(self, mock_backend):
        assert mock_backend.truncate_left("a b", 10) == "a b"

    @given(st.text(alphabet="ab \n", max_size=200), st.integers(min_value=0, max_value=50))
    def test_truncate_budget_and_idempotence(self, text, budget):
        backend = MockBackend(seed=0)
        once = backend.truncate_left(text, budget)
        assert backend.count_tokens(once) <= budget
        assert backend.truncate_left(once, budget) == once

    @given(st.text(alphabet="abc d", max_size=80), st.text(alphabet="abc d", max_size=80))
    def test_count_subadditive(self, a, b):
        backend = MockBackend(seed=0)
        assert backend.count_tokens(a + b) <= backend.count_tokens(a) + backend.count_tokens(b) + 1


class TestTableLoaders:
    def test_round_trip_tables(self, tmp_path):
        entail = tmp_path / "entail.tsv"
        entail.write_text(
            "# comment line\n"
            "A is B.\tA is C.\tcontradict\t0.9\n"
            "X holds.\tY holds.\tentail\t0.8\n"
        )
        table = load_entail_table(entail)
        assert table[(norm_phrase("A is B."), norm_phrase("A is C."))].p_contradict == pytest.approx(0.9)
        assert table[(norm_phrase("X holds."), norm_phrase("Y holds."))].p_entail == pytest.approx(0.8)

        qa = tmp_path / "qa.tsv"
        qa.write_text("What is Ada's age?\tforty\t0.75\nWho knows?\t\n")
        qa_table = load_qa_table(qa)
        assert qa_table[norm_phrase("What is Ada's age?")].confidence == pytest.approx(0.75)

        edit = tmp_path / "edit.tsv"
        edit.write_text("*\tEdit so that: Ada is tall.\tAda stood tall.\n")
        edit_table = load_edit_table(edit)
        backend = MockBackend(seed=0, edit_table=edit_table)
        assert backend.edit("whatever", "Edit so that: Ada is tall.") == "Ada stood tall."
