"""Pluggable model backends: deterministic mock and HTTP client."""

from .base import (
    Backend,
    BackendError,
    ContractViolationError,
    EntailmentVerdict,
    GenParams,
    QAResult,
    RetryPolicy,
    ScriptedScorer,
    TransportError,
    relevance,
)
from .http import HTTPBackend
from .mock import (
    MockBackend,
    load_edit_table,
    load_entail_table,
    load_qa_table,
    make_verdict,
)

__all__ = [
    "Backend",
    "BackendError",
    "ContractViolationError",
    "EntailmentVerdict",
    "GenParams",
    "HTTPBackend",
    "MockBackend",
    "QAResult",
    "RetryPolicy",
    "ScriptedScorer",
    "TransportError",
    "load_edit_table",
    "load_entail_table",
    "load_qa_table",
    "make_verdict",
    "relevance",
]
