"""Protocol conformance checks runnable against any scorer server.

The checked-in fixture file is the single authority for the wire schema:
the client parse tests replay its golden responses, and `serve-check`
sends its requests at a live server and validates the structural
invariants (field presence, aligned array lengths, finite floats,
descending top-k, error envelope).
"""

from __future__ import annotations

import json
import math
from importlib import resources

from .errors import ProtocolError
from .remote import RemoteBackend, ServerEndpoint, _parse_score_response
from .scorer import PromptSet, Token


def load_fixtures() -> dict:
    text = resources.files("errlens").joinpath("conformance.json").read_text("utf-8")
    return json.loads(text)


def _prompts_from_payload(payload: dict) -> PromptSet:
    return PromptSet(
        encoder_suffixes=tuple(payload.get("encoder_suffixes", ())),
        decoder_prefixes=tuple(payload.get("decoder_prefixes", ())),
    )


def run_conformance(endpoint: ServerEndpoint) -> list[str]:
    """Run every check; returns human-readable pass lines, raises on failure."""
    fixtures = load_fixtures()
    passed: list[str] = []
    with RemoteBackend(endpoint) as backend:
        info = backend.info()
        for key in ("model_id", "max_batch", "supports_topk"):
            if key not in info:
                raise ProtocolError(f"/v1/info missing {key!r}: {info!r}")
        passed.append(f"info: model_id={info['model_id']} max_batch={info['max_batch']}")

        req = fixtures["score"]["request"]
        seq = backend.score(
            req["condition"], req["target"], _prompts_from_payload(req["prompts"])
        )
        if "".join(t.surface for t in seq.tokens).strip() != req["target"].strip():
            raise ProtocolError("score tokens do not concatenate to the target")
        passed.append(f"score: {len(seq.tokens)} tokens, mean={seq.mean:.4f}")

        items = [
            (item["condition"], item["target"], _prompts_from_payload(item["prompts"]))
            for item in fixtures["score_batch"]["request"]["items"]
        ]
        results = backend.score_batch(items)
        if len(results) != len(items):
            raise ProtocolError("score_batch result count mismatch")
        passed.append(f"score_batch: {len(results)} results")

        req = fixtures["topk"]["request"]
        candidates = backend.topk(
            req["condition"], [Token.of(t) for t in req["prefix_tokens"]], req["k"]
        )
        if len(candidates) > req["k"]:
            raise ProtocolError(f"topk returned more than k={req['k']} candidates")
        logprobs = [lp for _, lp in candidates]
        if any(a < b for a, b in zip(logprobs, logprobs[1:])):
            raise ProtocolError("topk candidates are not sorted descending")
        if any(not math.isfinite(lp) for lp in logprobs):
            raise ProtocolError("topk returned non-finite logprob")
        passed.append(f"topk: {len(candidates)} candidates, descending")

        bad = fixtures["error"]["request"]
        response = backend._client.post("/v1/score", json=bad)
        if not 400 <= response.status_code < 500:
            raise ProtocolError(
                f"invalid request answered with status {response.status_code}"
            )
        envelope = response.json()
        err = envelope.get("error") if isinstance(envelope, dict) else None
        if not isinstance(err, dict) or "code" not in err or "message" not in err:
            raise ProtocolError(f"malformed error envelope: {envelope!r}")
        passed.append(f"error envelope: status={response.status_code} code={err['code']}")
    return passed
