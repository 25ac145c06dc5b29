"""HTTP layer for the scorer wire protocol.

Routes: POST /v1/score, /v1/score_batch, /v1/topk and GET /v1/info.
Every error leaves as {"error": {"code": ..., "message": ...}}: schema
violations as 400, bad credentials as 401, model failures as 500.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import ServerConfig
from .model import InvalidRequestError, Seq2SeqScorer


class PromptsPayload(BaseModel):
    encoder_suffixes: list[str] = Field(default_factory=list)
    decoder_prefixes: list[str] = Field(default_factory=list)


class ScoreRequest(BaseModel):
    condition: str
    target: str = Field(min_length=1)
    prompts: PromptsPayload = Field(default_factory=PromptsPayload)


class BatchRequest(BaseModel):
    items: list[ScoreRequest] = Field(min_length=1)


class TopkRequest(BaseModel):
    condition: str
    prefix_tokens: list[str] = Field(default_factory=list)
    k: int = Field(ge=1)


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"code": code, "message": message}}
    )


def create_app(scorer: Seq2SeqScorer, config: ServerConfig) -> FastAPI:
    app = FastAPI(title="errlens scorer server", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "invalid_request", str(exc.errors()[:3]))

    @app.exception_handler(InvalidRequestError)
    async def on_invalid_request(request: Request, exc: InvalidRequestError):
        return _error(400, "invalid_request", str(exc))

    @app.exception_handler(Exception)
    async def on_model_failure(request: Request, exc: Exception):
        return _error(500, "model_failure", f"{type(exc).__name__}: {exc}")

    def check_auth(request: Request) -> Optional[JSONResponse]:
        if config.auth_token is None:
            return None
        if request.headers.get("authorization") == f"Bearer {config.auth_token}":
            return None
        return _error(401, "unauthorized", "missing or invalid bearer token")

    def score_payload(req: ScoreRequest) -> dict:
        tokens, logprobs = scorer.score(
            req.condition,
            req.target,
            req.prompts.encoder_suffixes,
            req.prompts.decoder_prefixes,
        )
        return {"tokens": tokens, "logprobs": logprobs, "model_id": scorer.model_id}

    @app.get("/v1/info")
    async def info(request: Request):
        if denied := check_auth(request):
            return denied
        return {
            "model_id": scorer.model_id,
            "max_batch": config.max_batch,
            "supports_topk": True,
        }

    @app.post("/v1/score")
    async def score(request: Request, req: ScoreRequest):
        if denied := check_auth(request):
            return denied
        return score_payload(req)

    @app.post("/v1/score_batch")
    async def score_batch(request: Request, req: BatchRequest):
        if denied := check_auth(request):
            return denied
        if len(req.items) > config.max_batch:
            return _error(
                400,
                "batch_too_large",
                f"batch of {len(req.items)} exceeds max_batch={config.max_batch}",
            )
        return {"results": [score_payload(item) for item in req.items]}

    @app.post("/v1/topk")
    async def topk(request: Request, req: TopkRequest):
        if denied := check_auth(request):
            return denied
        candidates = scorer.topk(req.condition, req.prefix_tokens, req.k)
        return {
            "candidates": [{"token": t, "logprob": lp} for t, lp in candidates],
            "model_id": scorer.model_id,
        }

    return app
