"""HTTP client for the scorer wire protocol.

Stateless JSON over HTTP/1.1: POST /v1/score, /v1/score_batch, /v1/topk
and GET /v1/info. Token strings in responses carry their own leading
whitespace, so concatenating them reproduces the scored text; the client
never reorders or rescales server values.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Optional, Sequence
from urllib.parse import urlparse

import httpx

from .errors import ArgumentError, ProtocolError, ServerError, TransportError
from .ngram import word_tokenize
from .scorer import PromptSet, ScoredSequence, ScorerBackend, Token

DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_IN_FLIGHT = 4
DEFAULT_RETRIES = 2
DEFAULT_MAX_BATCH = 4


@dataclass(frozen=True)
class ServerEndpoint:
    base_url: str
    timeout: float = DEFAULT_TIMEOUT
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT
    auth_token: Optional[str] = None
    retries: int = DEFAULT_RETRIES

    def __post_init__(self):
        parsed = urlparse(self.base_url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ArgumentError(f"base_url must be an absolute URL, got {self.base_url!r}")
        if self.max_in_flight < 1:
            raise ArgumentError("max_in_flight must be >= 1")
        if self.retries < 0:
            raise ArgumentError("retries must be >= 0")


@dataclass(frozen=True)
class ScoreResponse:
    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]
    model_id: str


def prompts_payload(prompts: PromptSet) -> dict:
    return {
        "encoder_suffixes": list(prompts.encoder_suffixes),
        "decoder_prefixes": list(prompts.decoder_prefixes),
    }


def _parse_score_response(payload: dict) -> ScoreResponse:
    try:
        tokens = payload["tokens"]
        logprobs = payload["logprobs"]
        model_id = payload["model_id"]
    except (KeyError, TypeError):
        raise ProtocolError(f"score response missing required fields: {payload!r}")
    if not isinstance(tokens, list) or not isinstance(logprobs, list):
        raise ProtocolError("tokens and logprobs must be arrays")
    if len(tokens) != len(logprobs):
        raise ProtocolError(
            f"token/logprob length mismatch: {len(tokens)} vs {len(logprobs)}"
        )
    if not tokens:
        raise ProtocolError("score response is empty")
    values = []
    for lp in logprobs:
        if not isinstance(lp, (int, float)) or not math.isfinite(lp):
            raise ProtocolError(f"non-finite logprob in response: {lp!r}")
        values.append(float(lp))
    return ScoreResponse(tuple(str(t) for t in tokens), tuple(values), str(model_id))


class RemoteBackend(ScorerBackend):
    """Shareable across threads; bounds in-flight requests per endpoint."""

    concurrency_safe = True
    supports_topk = True

    def __init__(self, endpoint: ServerEndpoint, transport: Optional[httpx.BaseTransport] = None):
        super().__init__()
        self.endpoint = endpoint
        headers = {}
        if endpoint.auth_token:
            headers["Authorization"] = f"Bearer {endpoint.auth_token}"
        self._client = httpx.Client(
            base_url=endpoint.base_url,
            timeout=endpoint.timeout,
            headers=headers,
            transport=transport,
        )
        self._in_flight = threading.BoundedSemaphore(endpoint.max_in_flight)
        self._info_lock = threading.Lock()
        self._info: Optional[dict] = None

    # -- transport ---------------------------------------------------------

    def _request(self, method: str, path: str, body: Optional[dict] = None) -> dict:
        last_exc = None
        for _ in range(self.endpoint.retries + 1):
            try:
                with self._in_flight:
                    response = self._client.request(method, path, json=body)
                break
            except httpx.TransportError as exc:
                last_exc = exc
        else:
            raise TransportError(
                f"{method} {self.endpoint.base_url}{path} failed after "
                f"{self.endpoint.retries + 1} attempts: {last_exc}"
            ) from last_exc
        if response.status_code < 200 or response.status_code >= 300:
            raise ServerError(
                f"{method} {path} returned {response.status_code}: {response.text}",
                status=response.status_code,
                body=response.text,
            )
        try:
            return response.json()
        except ValueError as exc:
            raise ProtocolError(f"{method} {path} returned non-JSON body") from exc

    def info(self) -> dict:
        with self._info_lock:
            if self._info is None:
                payload = self._request("GET", "/v1/info")
                if not isinstance(payload, dict) or "model_id" not in payload:
                    raise ProtocolError(f"malformed info response: {payload!r}")
                self._info = payload
            return self._info

    @property
    def model_id(self) -> str:
        return str(self.info()["model_id"])

    @property
    def max_batch(self) -> int:
        return int(self.info().get("max_batch", DEFAULT_MAX_BATCH))

    # -- tokenization ------------------------------------------------------

    def tokenize(self, text: str) -> list[Token]:
        # Word-level view, used for the non-translation overlap statistic;
        # scoring-side tokens always come from the server verbatim.
        return [Token.of(w) for w in word_tokenize(text)]

    def detokenize(self, tokens: Sequence[Token]) -> str:
        return "".join(t.surface for t in tokens).strip()

    # -- scoring -----------------------------------------------------------

    def _to_sequence(self, parsed: ScoreResponse) -> ScoredSequence:
        return ScoredSequence.from_pairs(
            [Token.of(t) for t in parsed.tokens], parsed.logprobs
        )

    def _score(self, condition: str, target: str, prompts: PromptSet) -> ScoredSequence:
        payload = self._request(
            "POST",
            "/v1/score",
            {"condition": condition, "target": target, "prompts": prompts_payload(prompts)},
        )
        return self._to_sequence(_parse_score_response(payload))

    def score_batch(
        self, items: Sequence[tuple[str, str, PromptSet]]
    ) -> list[ScoredSequence]:
        """Chunked batch scoring honoring the server's advertised limit."""
        for _, target, _ in items:
            if not target:
                raise ArgumentError("target must be non-empty")
        results: list[ScoredSequence] = []
        limit = self.max_batch
        for start in range(0, len(items), limit):
            chunk = items[start : start + limit]
            payload = self._request(
                "POST",
                "/v1/score_batch",
                {
                    "items": [
                        {
                            "condition": condition,
                            "target": target,
                            "prompts": prompts_payload(prompts),
                        }
                        for condition, target, prompts in chunk
                    ]
                },
            )
            rows = payload.get("results") if isinstance(payload, dict) else None
            if not isinstance(rows, list) or len(rows) != len(chunk):
                raise ProtocolError(f"malformed batch response: {payload!r}")
            for row in rows:
                results.append(self._to_sequence(_parse_score_response(row)))
        return results

    def _topk(self, condition: str, prefix_tokens: Sequence[Token], k: int) -> list[tuple[Token, float]]:
        payload = self._request(
            "POST",
            "/v1/topk",
            {
                "condition": condition,
                "prefix_tokens": [t.surface for t in prefix_tokens],
                "k": k,
            },
        )
        candidates = payload.get("candidates") if isinstance(payload, dict) else None
        if not isinstance(candidates, list):
            raise ProtocolError(f"topk response missing candidates: {payload!r}")
        out = []
        for cand in candidates:
            try:
                token, lp = str(cand["token"]), float(cand["logprob"])
            except (KeyError, TypeError, ValueError):
                raise ProtocolError(f"malformed topk candidate: {cand!r}")
            if not math.isfinite(lp):
                raise ProtocolError(f"non-finite topk logprob: {cand!r}")
            out.append((Token.of(token), lp))
        return out

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "RemoteBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def remote_score(
    endpoint: ServerEndpoint,
    condition: str,
    target: str,
    prompts: PromptSet = PromptSet.empty(),
) -> ScoredSequence:
    with RemoteBackend(endpoint) as backend:
        return backend.score(condition, target, prompts)


def remote_topk(
    endpoint: ServerEndpoint,
    condition: str,
    prefix_tokens: Sequence[Token],
    k: int,
) -> list[tuple[Token, float]]:
    with RemoteBackend(endpoint) as backend:
        return backend.topk(condition, prefix_tokens, k)
