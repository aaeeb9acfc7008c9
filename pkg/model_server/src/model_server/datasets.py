"""Training-data construction for the coherence and relevance scorers.

Both builders carve token-bounded windows out of a story corpus and pair
them with contrastive negatives: the coherence set swaps in a continuation
from elsewhere (same story or a different one), the relevance set swaps in
the summary of a different passage. Whitespace tokens keep the builders
model-agnostic; limits are recorded with the output.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable


def _tokens(text: str) -> list[str]:
    return text.split()


def _detokenize(tokens: list[str]) -> str:
    return " ".join(tokens)


@dataclass(frozen=True)
class CoherenceExample:
    passage: str
    continuation: str
    label: int  # 1 gold continuation, 0 swapped


@dataclass(frozen=True)
class RelevanceExample:
    passage: str
    summary: str
    label: int  # 1 own summary, 0 another passage's


@dataclass
class BuildReport:
    stories_used: int = 0
    stories_skipped: int = 0
    windows: int = 0
    notes: dict = field(default_factory=dict)


def build_coherence_dataset(
    story_corpus: list[str],
    seed: int = 0,
    passage_limit: int = 1000,
    continuation_limit: int = 200,
    same_story_ratio: float = 0.5,
    min_story_tokens: int = 64,
) -> tuple[list[CoherenceExample], BuildReport]:
    """Balanced gold/swapped continuation pairs from a story corpus.

    Each window is a passage of up to `passage_limit` tokens whose trailing
    up-to-`continuation_limit` tokens are split off as the gold continuation.
    Every positive gets one negative whose continuation is drawn from the
    same story with probability `same_story_ratio` (when one exists),
    otherwise from a different story.
    """
    rng = random.Random(seed)
    report = BuildReport(notes={
        "passage_limit": passage_limit,
        "continuation_limit": continuation_limit,
        "same_story_ratio": same_story_ratio,
    })
    windows_by_story: list[list[tuple[str, str]]] = []
    for story in story_corpus:
        tokens = _tokens(story)
        if len(tokens) < min_story_tokens:
            report.stories_skipped += 1
            continue
        report.stories_used += 1
        windows: list[tuple[str, str]] = []
        window_size = passage_limit + continuation_limit
        for start in range(0, len(tokens), window_size):
            chunk = tokens[start : start + window_size]
            if len(chunk) < min_story_tokens:
                continue
            continuation_len = min(continuation_limit, max(1, len(chunk) // 5))
            passage = chunk[:-continuation_len]
            continuation = chunk[-continuation_len:]
            if not passage:
                continue
            windows.append((_detokenize(passage), _detokenize(continuation)))
        windows_by_story.append(windows)
        report.windows += len(windows)

    all_windows = [
        (story_idx, passage, continuation)
        for story_idx, windows in enumerate(windows_by_story)
        for passage, continuation in windows
    ]
    if len(all_windows) < 2:
        raise ValueError("corpus too small: need at least two usable windows")

    examples: list[CoherenceExample] = []
    for story_idx, passage, continuation in all_windows:
        examples.append(CoherenceExample(passage, continuation, 1))
        same_story = [
            (i, c) for i, (s, _, c) in enumerate(all_windows)
            if s == story_idx and c != continuation
        ]
        other_story = [
            (i, c) for i, (s, _, c) in enumerate(all_windows)
            if s != story_idx
        ]
        pool = (
            same_story
            if same_story and (not other_story or rng.random() < same_story_ratio)
            else other_story
        )
        _, negative = pool[rng.randrange(len(pool))]
        examples.append(CoherenceExample(passage, negative, 0))
    return examples, report


def build_relevance_dataset(
    story_corpus: list[str],
    summarizer: Callable[[str], str],
    count: int = 2000,
    seed: int = 0,
    passage_tokens: int = 200,
) -> tuple[list[RelevanceExample], BuildReport]:
    """Exactly `count` balanced passage/summary pairs.

    Passages are consecutive windows of at most `passage_tokens` tokens;
    summaries come from the provided summarization backend. Negatives reuse
    a different passage's summary. Raises when the corpus cannot supply
    enough distinct passages for the requested count.
    """
    if count < 2 or count % 2 != 0:
        raise ValueError("count must be an even number >= 2")
    rng = random.Random(seed)
    report = BuildReport(notes={"passage_tokens": passage_tokens, "count": count})

    passages: list[str] = []
    for story in story_corpus:
        tokens = _tokens(story)
        if not tokens:
            report.stories_skipped += 1
            continue
        report.stories_used += 1
        for start in range(0, len(tokens), passage_tokens):
            chunk = tokens[start : start + passage_tokens]
            if len(chunk) >= passage_tokens // 4:
                passages.append(_detokenize(chunk))
    report.windows = len(passages)

    needed = count // 2
    if len(passages) < 2:
        raise ValueError("corpus too small: need at least two passages")

    examples: list[RelevanceExample] = []
    summaries = {}
    for i in range(needed):
        passage = passages[i % len(passages)]
        if passage not in summaries:
            summaries[passage] = summarizer(passage)
        examples.append(RelevanceExample(passage, summaries[passage], 1))
        while True:
            other = passages[rng.randrange(len(passages))]
            if other != passage:
                break
        if other not in summaries:
            summaries[other] = summarizer(other)
        examples.append(RelevanceExample(passage, summaries[other], 0))
    return examples, report
