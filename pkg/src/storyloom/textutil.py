"""Text helpers shared across the pipeline: sentence splitting, word ops, name matching."""

from __future__ import annotations

import re

_TERMINATORS = ".!?"
_CLOSE_QUOTES = '"”’\''
_DOUBLE_QUOTES = '"“”'

_WORD_RE = re.compile(r"\S+")


def words(text: str) -> list[str]:
    return _WORD_RE.findall(text)


def normalize_word(token: str) -> str:
    """Lowercase a token and strip punctuation from its edges."""
    return token.strip("\"'“”‘’.,;:!?()[]-—").lower()


def normalized_words(text: str) -> list[str]:
    out = [normalize_word(t) for t in words(text)]
    return [t for t in out if t]


def norm_phrase(text: str) -> str:
    """Canonical form for equality checks: collapsed whitespace, lowercased, bare edges."""
    return " ".join(normalized_words(text))


def split_sentences(text: str) -> list[str]:
    """Split on sentence terminators, quote-aware.

    Terminators inside double-quoted spans do not end a sentence, so dialogue
    stays in one piece. Trailing close-quotes attach to the sentence they end.
    """
    sentences: list[str] = []
    buf: list[str] = []
    in_quote = False
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        buf.append(ch)
        if ch in _DOUBLE_QUOTES:
            in_quote = not in_quote
        elif ch in _TERMINATORS and not in_quote:
            # absorb runs of terminators and closing quotes
            j = i + 1
            while j < n and text[j] in _TERMINATORS:
                buf.append(text[j])
                j += 1
            while j < n and text[j] in _CLOSE_QUOTES:
                buf.append(text[j])
                j += 1
            if j >= n or text[j].isspace():
                sentence = "".join(buf).strip()
                if sentence:
                    sentences.append(sentence)
                buf = []
            i = j
            continue
        i += 1
    tail = "".join(buf).strip()
    if tail:
        sentences.append(tail)
    return sentences


def first_sentence(text: str) -> str:
    parts = split_sentences(text)
    return parts[0] if parts else ""


def truncate_sentences(text: str, limit: int) -> str:
    """Keep at most `limit` leading sentences."""
    parts = split_sentences(text)
    if len(parts) <= limit:
        return text.strip()
    return " ".join(parts[:limit])


def strip_quoted_spans(text: str) -> str:
    """Remove the contents of double-quoted spans (quote chars included)."""
    out: list[str] = []
    in_quote = False
    for ch in text:
        if ch in _DOUBLE_QUOTES:
            in_quote = not in_quote
            out.append(" ")
            continue
        out.append(" " if in_quote else ch)
    return "".join(out)


def name_tokens(name: str) -> tuple[str, ...]:
    return tuple(t for t in (normalize_word(w) for w in name.split()) if t)


def names_match(a: str, b: str) -> bool:
    """True when one name's tokens are a subset of the other's ("Karen" vs "Karen Voss")."""
    ta, tb = set(name_tokens(a)), set(name_tokens(b))
    if not ta or not tb:
        return False
    return ta <= tb or tb <= ta


def name_in_text(name: str, text: str) -> bool:
    """Word-boundary search for any token of the name (case-insensitive)."""
    toks = set(normalized_words(text))
    return any(t in toks for t in name_tokens(name))


def word_edit_distance(a: list[str], b: list[str]) -> int:
    """Levenshtein distance over word sequences."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, wa in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, wb in enumerate(b, start=1):
            cost = 0 if wa == wb else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]


def lowercase_leading(text: str, keep_words: set[str] | None = None) -> str:
    """Lowercase the first letter unless the first word is a protected proper noun."""
    stripped = text.lstrip()
    if not stripped:
        return text
    first = normalize_word(stripped.split()[0])
    if keep_words and first in keep_words:
        return text
    idx = len(text) - len(stripped)
    return text[:idx] + stripped[0].lower() + stripped[1:]
