"""Continuation filtering and reranking.

Rule-based filters knock out continuations with obvious writing problems
(emptiness, repetition, narration artifacts, person drift); survivors are
reranked by the sum of coherence and relevance log-probabilities from the
scorer backends.
"""

from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .backends.base import Backend
from .textutil import (
    normalized_words,
    split_sentences,
    strip_quoted_spans,
    word_edit_distance,
)

logger = logging.getLogger(__name__)

DEFAULT_HARD_BANNED = ("\nComment", "copyright", "all rights reserved", "©")
DEFAULT_SOFT_BANNED = ("Chapter", "Prologue", "Epilogue", "Author's note", "Summary:")

_FIRST_PERSON_RE = re.compile(r"\bI\b")
_OTHER_PERSON_RE = re.compile(r"\b(?:we|you)\b", re.IGNORECASE)


@dataclass(frozen=True)
class FilterConfig:
    min_repeat_ngram: int = 5
    sentence_similarity_ratio: float = 0.2
    banned_strings_hard: tuple[str, ...] = DEFAULT_HARD_BANNED
    banned_strings_soft: tuple[str, ...] = DEFAULT_SOFT_BANNED
    soft_banned_threshold: int = 2
    colon_head_window: int = 4

    def __post_init__(self) -> None:
        if self.min_repeat_ngram < 1 or self.colon_head_window < 1:
            raise ValueError("filter thresholds must be positive")
        if self.sentence_similarity_ratio <= 0:
            raise ValueError("sentence_similarity_ratio must be positive")


@dataclass(frozen=True)
class RerankConfig:
    filters: FilterConfig = FilterConfig()
    coherence_weight: float = 1.0
    relevance_weight: float = 1.0
    max_workers: int = 4


@dataclass
class Candidate:
    """A continuation with its filter verdict and reranker scores."""

    text: str
    sample_index: int
    filter_reason: str | None = None
    coherence_lp: float | None = None
    relevance_lp: float | None = None
    composite: float | None = None
    degraded: bool = False

    @property
    def passed_filters(self) -> bool:
        return self.filter_reason is None


def _ngrams(tokens: list[str], n: int) -> set[tuple[str, ...]]:
    return {tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


def _has_internal_repeat(tokens: list[str], n: int) -> bool:
    seen: set[tuple[str, ...]] = set()
    for i in range(len(tokens) - n + 1):
        gram = tuple(tokens[i : i + n])
        if gram in seen:
            return True
        seen.add(gram)
    return False


def _near_duplicate_sentences(text: str, ratio: float) -> bool:
    sentences = [normalized_words(s) for s in split_sentences(text)]
    sentences = [s for s in sentences if s]
    for i in range(len(sentences)):
        for j in range(i + 1, len(sentences)):
            longer = max(len(sentences[i]), len(sentences[j]))
            if longer == 0:
                continue
            if word_edit_distance(sentences[i], sentences[j]) <= ratio * longer:
                return True
    return False


def _colon_headed_paragraph(text: str, window: int) -> bool:
    for paragraph in text.split("\n"):
        head = paragraph.strip()
        if not head or ":" not in head:
            continue
        prefix = head.split(":", 1)[0]
        if len(prefix.split()) <= window:
            return True
    return False


def has_person_drift(text: str) -> bool:
    """First/second-person pronouns outside double-quoted spans."""
    outside = strip_quoted_spans(text)
    return bool(_FIRST_PERSON_RE.search(outside) or _OTHER_PERSON_RE.search(outside))


def heuristic_filter(
    candidate_text: str,
    prompt_text: str,
    cfg: FilterConfig | None = None,
) -> str | None:
    """First triggered failure reason, or None when the candidate passes.

    Checks run in a fixed order: emptiness; repetition (n-gram within the
    candidate or shared with the prompt, then near-duplicate sentences);
    narration artifacts (hard banned strings, enough soft banned strings,
    colon-headed paragraphs); person drift outside quotations.
    """
    cfg = cfg or FilterConfig()
    if not candidate_text.strip():
        return "empty"

    tokens = normalized_words(candidate_text)
    n = cfg.min_repeat_ngram
    if _has_internal_repeat(tokens, n):
        return "repetition:ngram"
    prompt_grams = _ngrams(normalized_words(prompt_text), n)
    if prompt_grams and _ngrams(tokens, n) & prompt_grams:
        return "repetition:prompt_ngram"
    if _near_duplicate_sentences(candidate_text, cfg.sentence_similarity_ratio):
        return "repetition:near_duplicate_sentences"

    lowered = candidate_text.lower()
    for banned in cfg.banned_strings_hard:
        if banned.lower() in lowered:
            return f"narration:banned:{banned.strip()}"
    soft_hits = sum(1 for s in cfg.banned_strings_soft if s.lower() in lowered)
    if soft_hits >= cfg.soft_banned_threshold:
        return "narration:soft_banned"
    if _colon_headed_paragraph(candidate_text, cfg.colon_head_window):
        return "narration:colon_header"

    if has_person_drift(candidate_text):
        return "person"
    return None


def score_candidate(
    backend: Backend,
    candidate: Candidate,
    previous_passage: str,
    outline_leaf_text: str,
    cfg: RerankConfig | None = None,
) -> Candidate:
    """Attach coherence/relevance log-probabilities and their weighted sum."""
    cfg = cfg or RerankConfig()
    p_coh = backend.score_coherence(previous_passage, candidate.text)
    p_rel = backend.score_relevance(outline_leaf_text, candidate.text)
    candidate.coherence_lp = math.log(p_coh) if p_coh > 0 else float("-inf")
    candidate.relevance_lp = math.log(p_rel) if p_rel > 0 else float("-inf")
    candidate.composite = (
        cfg.coherence_weight * candidate.coherence_lp
        + cfg.relevance_weight * candidate.relevance_lp
    )
    return candidate


def rerank(
    backend: Backend,
    candidate_texts: list[str],
    prompt_text: str,
    previous_passage: str,
    outline_leaf_text: str,
    cfg: RerankConfig | None = None,
) -> tuple[Candidate, list[Candidate]]:
    """Filter, score, and order candidates; best first.

    The returned list holds every candidate: scored ones ordered by composite
    descending (sample index breaking ties), then unscored filtered ones in
    sample order. If every candidate fails the filters, all of them are
    scored anyway and the highest-composite one is returned flagged as
    degraded rather than aborting the run.
    """
    if not candidate_texts:
        raise ValueError("rerank requires at least one candidate")
    cfg = cfg or RerankConfig()
    candidates = [
        Candidate(text=t, sample_index=i, filter_reason=heuristic_filter(t, prompt_text, cfg.filters))
        for i, t in enumerate(candidate_texts)
    ]
    survivors = [c for c in candidates if c.passed_filters]
    degraded = not survivors
    to_score = candidates if degraded else survivors

    def score(c: Candidate) -> Candidate:
        return score_candidate(backend, c, previous_passage, outline_leaf_text, cfg)

    if cfg.max_workers > 1 and len(to_score) > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
            list(pool.map(score, to_score))
    else:
        for c in to_score:
            score(c)

    ranked = sorted(to_score, key=lambda c: (-(c.composite or float("-inf")), c.sample_index))
    rest = [c for c in candidates if c not in to_score]
    best = ranked[0]
    if degraded:
        best.degraded = True
        logger.warning("all %d candidates failed filters; degraded pick %d",
                       len(candidates), best.sample_index)
    return best, ranked + rest
