"""Backend interface for all external model capabilities.

Every neural capability the pipeline needs (completion, insertion, editing,
embeddings, entailment, QA, NER, coherence/relevance scoring, tokenization)
sits behind this interface so the engine runs identically against the
deterministic mock and an HTTP model server.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field

import numpy as np


class BackendError(Exception):
    """Base class for backend failures."""


class TransportError(BackendError):
    """Transient transport failure; safe to retry."""


class ContractViolationError(BackendError):
    """Caller bug: a precondition such as the context limit was violated."""


@dataclass(frozen=True)
class GenParams:
    """Sampling parameters for completion-style calls."""

    max_tokens: int = 256
    temperature: float = 0.9
    num_samples: int = 1
    stop_sequences: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class EntailmentVerdict:
    """Probability triple from an NLI model."""

    p_entail: float
    p_neutral: float
    p_contradict: float

    def __post_init__(self) -> None:
        for p in (self.p_entail, self.p_neutral, self.p_contradict):
            if not 0.0 <= p <= 1.0:
                raise ValueError("entailment probabilities must be in [0, 1]")
        total = self.p_entail + self.p_neutral + self.p_contradict
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"entailment probabilities must sum to 1 (got {total})")

    def top(self) -> str:
        pairs = [
            ("entail", self.p_entail),
            ("neutral", self.p_neutral),
            ("contradict", self.p_contradict),
        ]
        return max(pairs, key=lambda kv: kv[1])[0]


@dataclass(frozen=True)
class QAResult:
    """Extractive-QA answer; empty answer means abstention."""

    answer: str
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")

    @property
    def abstained(self) -> bool:
        return not self.answer


def relevance(query_vec: np.ndarray, doc_vec: np.ndarray) -> float:
    """Relevance of a document to a query: inner product of their embeddings."""
    return float(np.dot(query_vec, doc_vec))


class Backend(abc.ABC):
    """All model capabilities used by the pipeline.

    Implementations must be safe for concurrent in-flight requests and must
    not share caller-visible mutable state between operations.
    """

    # -- generation -------------------------------------------------------

    @abc.abstractmethod
    def complete(self, prompt: str, params: GenParams) -> list[str]:
        """Return exactly `params.num_samples` continuations of the prompt."""

    @abc.abstractmethod
    def insert(self, prefix: str, suffix: str, params: GenParams) -> str:
        """Generate text bridging from prefix to suffix."""

    @abc.abstractmethod
    def edit(self, text: str, instruction: str) -> str:
        """Apply a natural-language editing instruction to the text."""

    # -- scoring / analysis ------------------------------------------------

    @abc.abstractmethod
    def embed(self, texts: list[str]) -> list[np.ndarray]:
        """Embed each text as a unit vector; all vectors share one dimension."""

    @abc.abstractmethod
    def entail(self, premise_text: str, hypothesis: str) -> EntailmentVerdict:
        """NLI verdict for premise -> hypothesis."""

    @abc.abstractmethod
    def answer(self, question: str, context: str) -> QAResult:
        """Extractive QA over the context."""

    @abc.abstractmethod
    def detect_entities(self, text: str) -> list[tuple[str, bool]]:
        """Distinct named entities as (surface_name, is_person)."""

    @abc.abstractmethod
    def score_coherence(self, prefix: str, continuation: str) -> float:
        """P(continuation coherently follows prefix), in [0, 1]."""

    @abc.abstractmethod
    def score_relevance(self, reference: str, passage: str) -> float:
        """P(passage is relevant to the reference text), in [0, 1]."""

    # -- tokenization -------------------------------------------------------

    @abc.abstractmethod
    def count_tokens(self, text: str) -> int:
        """Token count in this backend's own units."""

    @abc.abstractmethod
    def truncate_left(self, text: str, budget: int) -> str:
        """Keep the trailing tokens so the result fits within `budget` tokens."""


@dataclass
class RetryPolicy:
    """Exponential backoff for transient transport failures."""

    max_attempts: int = 3
    base_delay: float = 0.5
    multiplier: float = 2.0

    def delays(self) -> list[float]:
        return [self.base_delay * self.multiplier**i for i in range(self.max_attempts - 1)]


@dataclass
class ScriptedScorer:
    """Test double: replays fixed coherence/relevance probability schedules."""

    coherence: list[float] = field(default_factory=list)
    relevance_scores: list[float] = field(default_factory=list)
    default: float = 0.5
    _c: int = 0
    _r: int = 0

    def score_coherence(self, prefix: str, continuation: str) -> float:
        if self._c < len(self.coherence):
            value = self.coherence[self._c]
            self._c += 1
            return value
        return self.default

    def score_relevance(self, reference: str, passage: str) -> float:
        if self._r < len(self.relevance_scores):
            value = self.relevance_scores[self._r]
            self._r += 1
            return value
        return self.default
