"""Wire schemas for every endpoint; requests validate field presence and
non-emptiness, responses validate probability ranges and the entailment
triple's normalization."""

from __future__ import annotations

from pydantic import BaseModel, Field, field_validator, model_validator


def _require_text(value: str, name: str) -> str:
    if not value or not value.strip():
        raise ValueError(f"{name} must be non-empty")
    return value


class CoherenceRequest(BaseModel):
    prefix: str
    continuation: str

    @field_validator("prefix", "continuation")
    @classmethod
    def _non_empty(cls, v: str, info) -> str:
        return _require_text(v, info.field_name)


class RelevanceRequest(BaseModel):
    summary: str
    passage: str

    @field_validator("summary", "passage")
    @classmethod
    def _non_empty(cls, v: str, info) -> str:
        return _require_text(v, info.field_name)


class ScoreResponse(BaseModel):
    probability: float = Field(ge=0.0, le=1.0)


class EntailRequest(BaseModel):
    premise: str
    hypothesis: str

    @field_validator("premise", "hypothesis")
    @classmethod
    def _non_empty(cls, v: str, info) -> str:
        return _require_text(v, info.field_name)


class EntailResponse(BaseModel):
    entail: float = Field(ge=0.0, le=1.0)
    neutral: float = Field(ge=0.0, le=1.0)
    contradict: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _normalized(self) -> "EntailResponse":
        total = self.entail + self.neutral + self.contradict
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities must sum to 1 (got {total})")
        return self


class EmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)


class EmbedResponse(BaseModel):
    vectors: list[list[float]]

    @model_validator(mode="after")
    def _consistent_dimension(self) -> "EmbedResponse":
        dims = {len(v) for v in self.vectors}
        if len(dims) > 1:
            raise ValueError(f"inconsistent vector dimensions: {sorted(dims)}")
        return self


class QARequest(BaseModel):
    question: str
    context: str

    @field_validator("question", "context")
    @classmethod
    def _non_empty(cls, v: str, info) -> str:
        return _require_text(v, info.field_name)


class QAResponse(BaseModel):
    answer: str  # empty string means abstention
    confidence: float = Field(ge=0.0, le=1.0)


class NERRequest(BaseModel):
    text: str

    @field_validator("text")
    @classmethod
    def _non_empty(cls, v: str, info) -> str:
        return _require_text(v, info.field_name)


class Entity(BaseModel):
    name: str
    is_person: bool


class NERResponse(BaseModel):
    entities: list[Entity]


class HealthResponse(BaseModel):
    status: str
    provider: str
