"""HTTP client backend speaking the model-server JSON protocol.

Each capability gets its own base URL so generation can point at one service
and scoring/NLI/QA/NER at another. Credentials come from an environment
variable holding a bearer token. Token accounting is done locally with
whitespace tokens; budgets are honored relative to this backend's own units.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Any

import httpx
import numpy as np

from .base import (
    Backend,
    ContractViolationError,
    EntailmentVerdict,
    GenParams,
    QAResult,
    RetryPolicy,
    TransportError,
)

DEFAULT_TOKEN_ENV = "STORYLOOM_API_TOKEN"

CAPABILITIES = ("complete", "insert", "edit", "embed", "entail", "qa", "ner", "score")


@dataclass
class HTTPBackend(Backend):
    """Backend that forwards every capability to HTTP/JSON endpoints."""

    base_urls: dict[str, str]
    token_env: str = DEFAULT_TOKEN_ENV
    timeout: float = 60.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    client: httpx.Client | None = None

    def __post_init__(self) -> None:
        unknown = set(self.base_urls) - set(CAPABILITIES)
        if unknown:
            raise ValueError(f"unknown capabilities: {sorted(unknown)}")
        if self.client is None:
            self.client = httpx.Client(timeout=self.timeout)

    # -- generation -------------------------------------------------------

    def complete(self, prompt: str, params: GenParams) -> list[str]:
        payload = {
            "prompt": prompt,
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "num_samples": params.num_samples,
            "stop_sequences": list(params.stop_sequences),
        }
        data = self._post("complete", "/complete", payload)
        texts = data["texts"]
        if len(texts) != params.num_samples:
            raise TransportError(
                f"server returned {len(texts)} texts, expected {params.num_samples}"
            )
        return texts

    def insert(self, prefix: str, suffix: str, params: GenParams) -> str:
        if not prefix.strip():
            raise ValueError("insert requires a non-empty prefix")
        payload = {
            "prefix": prefix,
            "suffix": suffix,
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
        }
        return self._post("insert", "/insert", payload)["text"]

    def edit(self, text: str, instruction: str) -> str:
        if not text.strip() or not instruction.strip():
            raise ValueError("edit requires non-empty text and instruction")
        return self._post("edit", "/edit", {"text": text, "instruction": instruction})[
            "text"
        ]

    # -- scoring / analysis ------------------------------------------------

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        if not texts:
            raise ValueError("embed requires at least one text")
        data = self._post("embed", "/embed", {"texts": texts})
        return [np.asarray(v, dtype=float) for v in data["vectors"]]

    def entail(self, premise_text: str, hypothesis: str) -> EntailmentVerdict:
        if not premise_text.strip() or not hypothesis.strip():
            raise ValueError("entail requires non-empty premise and hypothesis")
        data = self._post(
            "entail", "/entail", {"premise": premise_text, "hypothesis": hypothesis}
        )
        return EntailmentVerdict(data["entail"], data["neutral"], data["contradict"])

    def answer(self, question: str, context: str) -> QAResult:
        if not question.strip() or not context.strip():
            raise ValueError("answer requires non-empty question and context")
        data = self._post("qa", "/qa", {"question": question, "context": context})
        return QAResult(data["answer"], data["confidence"])

    def detect_entities(self, text: str) -> list[tuple[str, bool]]:
        if not text.strip():
            raise ValueError("detect_entities requires non-empty text")
        data = self._post("ner", "/ner", {"text": text})
        return [(e["name"], bool(e["is_person"])) for e in data["entities"]]

    def score_coherence(self, prefix: str, continuation: str) -> float:
        data = self._post(
            "score",
            "/score/coherence",
            {"prefix": prefix, "continuation": continuation},
        )
        return float(data["probability"])

    def score_relevance(self, reference: str, passage: str) -> float:
        data = self._post(
            "score", "/score/relevance", {"summary": reference, "passage": passage}
        )
        return float(data["probability"])

    # -- tokenization -------------------------------------------------------

    def count_tokens(self, text: str) -> int:
        return len(text.split())

    def truncate_left(self, text: str, budget: int) -> str:
        if budget < 0:
            raise ValueError("budget must be >= 0")
        tokens = text.split()
        if len(tokens) <= budget:
            return text
        if budget == 0:
            return ""
        return " ".join(tokens[-budget:])

    # -- transport ----------------------------------------------------------

    def _post(self, capability: str, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        base = self.base_urls.get(capability)
        if base is None:
            raise ContractViolationError(
                f"no base URL configured for capability {capability!r}"
            )
        url = base.rstrip("/") + path
        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        attempts = self.retry.max_attempts
        delays = self.retry.delays()
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                response = self.client.post(url, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last_error = exc
            else:
                if response.status_code >= 500:
                    last_error = TransportError(
                        f"server error {response.status_code} from {url}"
                    )
                elif response.status_code >= 400:
                    raise ContractViolationError(
                        f"request rejected ({response.status_code}): {response.text}"
                    )
                else:
                    return response.json()
            if attempt < len(delays) and delays[attempt] > 0:
                time.sleep(delays[attempt])
        raise TransportError(f"request to {url} failed after {attempts} attempts") from (
            last_error
        )
