"""Model providers behind the endpoints.

HashProvider serves deterministic stand-in outputs with no model weights so
the wire protocol is fully exercisable offline. TransformersProvider loads
pretrained checkpoints lazily and is only imported when configured.
"""

from __future__ import annotations

import hashlib
import os
import re
from dataclasses import dataclass

import numpy as np

EMBED_DIM = 64

_STOPWORDS = frozenset(
    "the a an is are was were and or of in at to on with for it its his her "
    "their this that they she he as by from what who whom whose which".split()
)


def _digest(*parts: object) -> int:
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")


def _words(text: str) -> list[str]:
    return [w for w in re.split(r"[^\w'-]+", text.lower()) if w]


def _content_words(text: str) -> list[str]:
    return [w for w in _words(text) if w not in _STOPWORDS]


def _sentences(text: str) -> list[str]:
    parts = re.split(r"(?<=[.!?])\s+", text.strip())
    return [p for p in parts if p]


@dataclass
class HashProvider:
    """Deterministic provider: outputs are keyed hashes of the inputs."""

    seed: int = 0
    name: str = "hash"

    def score_coherence(self, prefix: str, continuation: str) -> float:
        return self._probability("coherence", prefix, continuation)

    def score_relevance(self, summary: str, passage: str) -> float:
        return self._probability("relevance", summary, passage)

    def entail(self, premise: str, hypothesis: str) -> tuple[float, float, float]:
        p_words, h_words = _words(premise), _words(hypothesis)
        if p_words == h_words:
            return (0.90, 0.08, 0.02)
        if h_words and set(h_words) <= set(p_words):
            return (0.80, 0.15, 0.05)
        return (0.10, 0.80, 0.10)

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [self._embed_one(t) for t in texts]

    def answer(self, question: str, context: str) -> tuple[str, float]:
        wanted = set(_content_words(question))
        if not wanted:
            return "", 0.0
        best_sentence = ""
        best_overlap = 0
        for sentence in _sentences(context):
            overlap = len(wanted & set(_content_words(sentence)))
            if overlap > best_overlap:
                best_overlap, best_sentence = overlap, sentence
        if best_overlap == 0:
            return "", 0.0
        confidence = min(0.9, best_overlap / len(wanted))
        return best_sentence, confidence

    def detect_entities(self, text: str) -> list[tuple[str, bool]]:
        seen: dict[str, bool] = {}
        for sentence in _sentences(text):
            tokens = sentence.split()
            run: list[str] = []
            start = -1
            for i, raw in enumerate(tokens + [""]):
                word = raw.strip("\"'.,;:!?()[]")
                capitalized = (
                    len(word) > 1
                    and word[0].isupper()
                    and any(c.islower() for c in word[1:])
                )
                if capitalized:
                    if not run:
                        start = i
                    run.append(word)
                else:
                    if run and start != 0:
                        surface = " ".join(run)
                        seen.setdefault(surface, True)
                    run = []
        return list(seen.items())

    def _probability(self, kind: str, a: str, b: str) -> float:
        h = _digest(self.seed, kind, a, b) % 10**9
        return 0.05 + 0.9 * (h / 10**9)

    def _embed_one(self, text: str) -> list[float]:
        vec = np.zeros(EMBED_DIM)
        for token in _words(text):
            if token in _STOPWORDS:
                continue
            vec[_digest("embed", token) % EMBED_DIM] += 1.0
        norm = np.linalg.norm(vec)
        if norm == 0:
            vec[0] = 1.0
        else:
            vec = vec / norm
        return vec.tolist()


class TransformersProvider:
    """Pretrained checkpoints behind the same interface.

    Checkpoint locations come from environment variables (or constructor
    arguments): COHERENCE_MODEL_PATH, RELEVANCE_MODEL_PATH for the finetuned
    sequence classifiers, NLI_MODEL for the entailment model, QA_MODEL,
    EMBED_MODEL, NER_MODEL for the pretrained pipelines. Imports happen at
    construction, so the dependency is only needed when this provider runs.
    """

    name = "transformers"

    def __init__(
        self,
        coherence_path: str | None = None,
        relevance_path: str | None = None,
        nli_model: str | None = None,
        qa_model: str | None = None,
        embed_model: str | None = None,
        ner_model: str | None = None,
    ):
        from transformers import pipeline  # deferred heavy import

        self._pipeline = pipeline
        self._coherence = self._classifier(
            coherence_path or os.environ.get("COHERENCE_MODEL_PATH")
        )
        self._relevance = self._classifier(
            relevance_path or os.environ.get("RELEVANCE_MODEL_PATH")
        )
        self._nli = pipeline(
            "text-classification",
            model=nli_model or os.environ.get("NLI_MODEL", "facebook/bart-large-mnli"),
            top_k=None,
        )
        self._qa = pipeline(
            "question-answering",
            model=qa_model or os.environ.get("QA_MODEL", "allenai/unifiedqa-t5-large"),
        )
        self._embedder = pipeline(
            "feature-extraction",
            model=embed_model
            or os.environ.get("EMBED_MODEL", "facebook/dpr-question_encoder-single-nq-base"),
        )
        self._ner = pipeline(
            "ner",
            model=ner_model or os.environ.get("NER_MODEL", "dslim/bert-base-NER"),
            aggregation_strategy="simple",
        )

    def _classifier(self, path: str | None):
        if not path:
            raise RuntimeError(
                "scorer checkpoint path not configured; set COHERENCE_MODEL_PATH "
                "and RELEVANCE_MODEL_PATH or use the hash provider"
            )
        return self._pipeline("text-classification", model=path, top_k=None)

    def score_coherence(self, prefix: str, continuation: str) -> float:
        return self._positive_probability(self._coherence, f"{prefix}</s>{continuation}")

    def score_relevance(self, summary: str, passage: str) -> float:
        return self._positive_probability(self._relevance, f"{summary}</s>{passage}")

    @staticmethod
    def _positive_probability(classifier, text: str) -> float:
        scores = classifier(text)[0]
        by_label = {s["label"].lower(): s["score"] for s in scores}
        for label in ("positive", "label_1", "true"):
            if label in by_label:
                return float(by_label[label])
        return float(max(s["score"] for s in scores))

    def entail(self, premise: str, hypothesis: str) -> tuple[float, float, float]:
        scores = self._nli(f"{premise}</s></s>{hypothesis}")[0]
        by_label = {s["label"].lower(): s["score"] for s in scores}
        triple = (
            by_label.get("entailment", 0.0),
            by_label.get("neutral", 0.0),
            by_label.get("contradiction", 0.0),
        )
        total = sum(triple) or 1.0
        return tuple(p / total for p in triple)  # type: ignore[return-value]

    def embed(self, texts: list[str]) -> list[list[float]]:
        vectors = []
        for text in texts:
            features = np.asarray(self._embedder(text)[0])
            pooled = features.mean(axis=0)
            norm = np.linalg.norm(pooled) or 1.0
            vectors.append((pooled / norm).tolist())
        return vectors

    def answer(self, question: str, context: str) -> tuple[str, float]:
        result = self._qa(question=question, context=context)
        return result.get("answer", ""), float(result.get("score", 0.0))

    def detect_entities(self, text: str) -> list[tuple[str, bool]]:
        out: dict[str, bool] = {}
        for item in self._ner(text):
            out.setdefault(item["word"], item.get("entity_group") == "PER")
        return list(out.items())


def make_provider(kind: str, seed: int = 0):
    if kind == "hash":
        return HashProvider(seed=seed)
    if kind == "transformers":
        return TransformersProvider()
    raise ValueError(f"unknown provider {kind!r}")
