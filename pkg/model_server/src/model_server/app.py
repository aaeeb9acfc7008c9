"""FastAPI application exposing the scoring, NLI, embedding, QA, and NER
endpoints over the JSON wire protocol."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .providers import HashProvider
from .schemas import (
    CoherenceRequest,
    EmbedRequest,
    EmbedResponse,
    EntailRequest,
    EntailResponse,
    Entity,
    HealthResponse,
    NERRequest,
    NERResponse,
    QARequest,
    QAResponse,
    RelevanceRequest,
    ScoreResponse,
)


def create_app(provider=None) -> FastAPI:
    provider = provider if provider is not None else HashProvider()
    app = FastAPI(title="storyloom model server", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def _validation_to_400(request: Request, exc: RequestValidationError):
        # malformed requests answer 400 with the schema violation details
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(status="ok", provider=provider.name)

    @app.post("/score/coherence", response_model=ScoreResponse)
    def score_coherence(req: CoherenceRequest) -> ScoreResponse:
        return ScoreResponse(
            probability=provider.score_coherence(req.prefix, req.continuation)
        )

    @app.post("/score/relevance", response_model=ScoreResponse)
    def score_relevance(req: RelevanceRequest) -> ScoreResponse:
        return ScoreResponse(
            probability=provider.score_relevance(req.summary, req.passage)
        )

    @app.post("/entail", response_model=EntailResponse)
    def entail(req: EntailRequest) -> EntailResponse:
        p_entail, p_neutral, p_contradict = provider.entail(req.premise, req.hypothesis)
        return EntailResponse(
            entail=p_entail, neutral=p_neutral, contradict=p_contradict
        )

    @app.post("/embed", response_model=EmbedResponse)
    def embed(req: EmbedRequest) -> EmbedResponse:
        return EmbedResponse(vectors=provider.embed(req.texts))

    @app.post("/qa", response_model=QAResponse)
    def qa(req: QARequest) -> QAResponse:
        answer, confidence = provider.answer(req.question, req.context)
        return QAResponse(answer=answer, confidence=confidence)

    @app.post("/ner", response_model=NERResponse)
    def ner(req: NERRequest) -> NERResponse:
        return NERResponse(
            entities=[
                Entity(name=name, is_person=is_person)
                for name, is_person in provider.detect_entities(req.text)
            ]
        )

    return app
