from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from storyloom.backends import MockBackend, ScriptedScorer
from storyloom.rewriting import (
    Candidate,
    FilterConfig,
    RerankConfig,
    heuristic_filter,
    rerank,
    score_candidate,
)

CFG = FilterConfig()

# (case text, prompt, expected-prefix-or-None); boundary cases compute their
# own expectation inline below
FILTER_TABLE = [
    # emptiness
    ("", "", "empty"),
    ("   \n ", "", "empty"),
    ("\t\t", "", "empty"),
    # 5-gram repetition inside the candidate
    ("the old man by the sea walked. the old man by the sea smiled.", "", "repetition:ngram"),
    ("one two three four five six. then one two three four five again.", "", "repetition:ngram"),
    ("a b c d e stop a b c d e", "", "repetition:ngram"),
    # shared 5-gram with the prompt
    ("she walked along the narrow road home.", "he said she walked along the narrow road once.", "repetition:prompt_ngram"),
    ("the lantern in the window burned.", "the lantern in the window went dark.", "repetition:prompt_ngram"),
    # four-word repeats are fine
    ("the old man walked. the old man smiled.", "", None),
    ("she went home early. she went home later that week.", "", None),
    # near-duplicate sentences (edits spaced so no 5-gram repeats)
    (
        "alpha bravo charlie delta echo foxtrot golf hotel india juliet. "
        "alpha bravo charlie delta kilo foxtrot golf hotel india lima.",
        "",
        "repetition:near_duplicate_sentences",
    ),
    # hard banned strings
    ("A fine day.\nComment from the author follows.", "", "narration:banned"),
    ("This text is under copyright by someone.", "", "narration:banned"),
    ("All rights reserved for this work.", "", "narration:banned"),
    # soft banned strings: one is fine, two is not
    ("Chapter two began quietly enough for everyone there.", "", None),
    ("Chapter two began. Epilogue notes came later.", "", "narration:soft_banned"),
    ("The prologue mentioned an epilogue somewhere.", "", "narration:soft_banned"),
    # colon-headed paragraphs
    ("Analysis: the hero fails badly here.", "", "narration:colon_header"),
    ("Scene notes: nothing of value.", "", "narration:colon_header"),
    ("A long paragraph where someone finally said the word three hours later: too late.", "", None),
    # person drift outside quotes
    ("I walked home.", "", "person"),
    ("Then we turned back toward town.", "", "person"),
    ("Where were you when the bells rang out there.", "", "person"),
    ('"I am here," she said. She left.', "", None),
    ('"Will you come along?" asked Ila. Nobody answered her.', "", None),
    ("The pronoun i stays lowercase and harmless here.", "", None),
    ("Ilsa waited. Winter held.", "", None),
    # clean multi-sentence passages
    ("The quay stood empty. Gulls argued over a crust near the pilings.", "", None),
    ("Rain came in off the water and the stalls closed one by one.", "", None),
    ("Night settled early that autumn and the lamps burned until morning.", "", None),
]


class TestFilterTable:
    @pytest.mark.parametrize("text,prompt,expected", FILTER_TABLE)
    def test_expected_verdicts(self, text, prompt, expected):
        reason = heuristic_filter(text, prompt, CFG)
        if expected is None:
            assert reason is None, f"unexpected failure {reason!r} for {text!r}"
        else:
            assert reason is not None and reason.startswith(expected)

    def test_table_has_at_least_30_cases(self):
        assert len(FILTER_TABLE) >= 30

    def test_near_duplicate_ratio_boundary(self):
        # ten-word sentences; ratio 0.2 allows edit distance exactly 2; edit
        # positions are spaced so no identical 5-word run survives
        base = "alpha bravo charlie delta echo foxtrot golf hotel india juliet"
        two_edits = "alpha bravo charlie delta kilo foxtrot golf hotel india lima"
        three_edits = "alpha bravo mike delta echo november golf hotel oscar juliet"
        at_boundary = f"{base}. {two_edits}."
        past_boundary = f"{base}. {three_edits}."
        assert heuristic_filter(at_boundary, "", CFG) == "repetition:near_duplicate_sentences"
        assert heuristic_filter(past_boundary, "", CFG) is None

    def test_order_of_reasons_empty_first(self):
        assert heuristic_filter("", "the old man by the", CFG) == "empty"

    def test_filter_is_pure(self):
        text = "I walked. I walked."
        assert heuristic_filter(text, "", CFG) == heuristic_filter(text, "", CFG)


def person_filter_oracle(text: str) -> bool:
    """Independent brute-force oracle: strip quoted spans with a character
    scanner, then word-scan for the pronouns."""
    out = []
    in_quote = False
    for ch in text:
        if ch in '"“”':
            in_quote = not in_quote
            out.append(" ")
        else:
            out.append(" " if in_quote else ch)
    cleaned = "".join(out)
    import re

    tokens = [t for t in re.split(r"[^\w]+", cleaned) if t]
    for t in tokens:
        if t == "I":
            return True
        if t.lower() in ("we", "you"):
            return True
    return False


class TestPersonFilterOracle:
    def test_matches_oracle_on_constructed_corpus(self):
        rng = random.Random(42)
        quoted_bits = ['"I hear it," she said.', '"Will you wait?"', '"We should go."']
        clean_bits = [
            "The tide turned.", "Horses stamped in the yard.", "It rained for days.",
            "Isla counted the crates.", "Wind took the last leaves.",
        ]
        dirty_bits = [
            "I kept the letter.", "Then we argued.", "You could smell the smoke.",
            "Later I slept.", "We never spoke of it.",
        ]
        corpus = []
        for _ in range(120):
            parts = []
            for _ in range(rng.randint(1, 4)):
                bucket = rng.choice([quoted_bits, clean_bits, dirty_bits])
                parts.append(rng.choice(bucket))
            corpus.append(" ".join(parts))
        assert len(corpus) >= 100
        for text in corpus:
            got = heuristic_filter(text, "", CFG)
            is_person_failure = got == "person"
            # other failure reasons (e.g. repetition from duplicated bits) are
            # checked only when the oracle says pronouns are absent
            if person_filter_oracle(text):
                assert got is not None
                if got != "person":
                    assert got.startswith("repetition")
            else:
                assert not is_person_failure


class TestScoreCandidate:
    def test_log_of_certainty_is_zero(self):
        scorer = ScriptedScorer(coherence=[1.0], relevance_scores=[1.0])
        c = score_candidate(scorer, Candidate("text", 0), "prev", "leaf")
        assert c.composite == pytest.approx(0.0)

    def test_hand_arithmetic(self):
        scorer = ScriptedScorer(coherence=[0.5], relevance_scores=[0.25])
        c = score_candidate(scorer, Candidate("text", 0), "prev", "leaf")
        assert c.composite == pytest.approx(math.log(0.5) + math.log(0.25))
        assert c.composite == pytest.approx(-2.0794, abs=1e-4)

    def test_zero_probability_is_minus_infinity(self):
        scorer = ScriptedScorer(coherence=[0.0], relevance_scores=[0.5])
        c = score_candidate(scorer, Candidate("text", 0), "prev", "leaf")
        assert c.composite == float("-inf")


class _TableScorer:
    """Deterministic scorer keyed by candidate text."""

    def __init__(self, coh: dict[str, float], rel: dict[str, float]):
        self.coh, self.rel = coh, rel

    def score_coherence(self, prefix, continuation):
        return self.coh.get(continuation, 0.5)

    def score_relevance(self, reference, passage):
        return self.rel.get(passage, 0.5)


class TestRerank:
    def texts(self):
        return [
            "I spoil everything.",                      # person-filtered
            "The road bent north past the mill.",       # survivor
            "The ferry idled against the pier.",        # survivor
            "Analysis: none.",                          # colon-filtered
            "Snow finally reached the valley floor.",   # survivor
        ]

    def test_best_is_max_composite_survivor(self):
        scorer = _TableScorer(
            coh={
                "The road bent north past the mill.": 0.9,
                "The ferry idled against the pier.": 0.5,
                "Snow finally reached the valley floor.": 0.7,
            },
            rel={},
        )
        best, ranked = rerank(scorer, self.texts(), "", "prev", "leaf")
        assert best.text == "The road bent north past the mill."
        assert not best.degraded
        survivors = [c for c in ranked if c.passed_filters]
        assert len(survivors) == 3
        assert ranked[: len(survivors)] == survivors  # scored ones lead
        assert len(ranked) == len(self.texts())  # failures kept with verdicts

    def test_all_filtered_degraded_fallback(self):
        texts = ["I one.", "I two.", "I three."]
        scorer = _TableScorer(coh={"I two.": 0.99}, rel={})
        best, ranked = rerank(scorer, texts, "", "prev", "leaf")
        assert best.degraded
        assert best.text == "I two."

    def test_tie_broken_by_sample_index(self):
        texts = ["The road bent.", "The ferry idled.", "Snow reached town."]
        scorer = _TableScorer(coh={}, rel={})  # all equal
        best, _ = rerank(scorer, texts, "", "prev", "leaf")
        assert best.sample_index == 0

    def test_permutation_invariance_of_best_text(self):
        texts = [
            "The road bent north past the mill.",
            "The ferry idled against the pier.",
            "Snow finally reached the valley floor.",
        ]
        scorer = _TableScorer(
            coh={texts[0]: 0.2, texts[1]: 0.9, texts[2]: 0.4}, rel={}
        )
        best_orders = set()
        for perm in ([0, 1, 2], [2, 1, 0], [1, 0, 2], [2, 0, 1]):
            permuted = [texts[i] for i in perm]
            best, _ = rerank(scorer, permuted, "", "prev", "leaf")
            best_orders.add(best.text)
        assert best_orders == {"The ferry idled against the pier."}

    def test_monotonicity_raising_score_never_lowers_rank(self):
        texts = [
            "The road bent north past the mill.",
            "The ferry idled against the pier.",
            "Snow finally reached the valley floor.",
        ]
        base = {texts[0]: 0.4, texts[1]: 0.5, texts[2]: 0.6}
        scorer = _TableScorer(coh=dict(base), rel={})
        _, ranked = rerank(scorer, texts, "", "prev", "leaf")
        rank_before = [c.text for c in ranked].index(texts[0])
        boosted = dict(base, **{texts[0]: 0.95})
        scorer = _TableScorer(coh=boosted, rel={})
        _, ranked = rerank(scorer, texts, "", "prev", "leaf")
        rank_after = [c.text for c in ranked].index(texts[0])
        assert rank_after <= rank_before

    def test_empty_candidate_list_rejected(self, mock_backend):
        with pytest.raises(ValueError):
            rerank(mock_backend, [], "", "prev", "leaf")

    def test_serial_and_parallel_scoring_agree(self):
        texts = [f"Candidate number {i} walked the {w} path." for i, w in
                 enumerate(["stone", "gravel", "cedar", "birch", "fern"])]
        backend = MockBackend(seed=4)
        best_serial, ranked_serial = rerank(
            backend, texts, "", "prev", "leaf", RerankConfig(max_workers=1)
        )
        best_parallel, ranked_parallel = rerank(
            backend, texts, "", "prev", "leaf", RerankConfig(max_workers=4)
        )
        assert best_serial.text == best_parallel.text
        assert [c.text for c in ranked_serial] == [c.text for c in ranked_parallel]


@settings(max_examples=50, deadline=None)
@given(st.text(alphabet="ab \"Iwe.you", max_size=60))
def test_person_filter_agrees_with_oracle_on_fuzz(text):
    got = heuristic_filter(text, "", CFG)
    oracle = person_filter_oracle(text)
    if got == "person":
        assert oracle
    elif got is None:
        assert not oracle
