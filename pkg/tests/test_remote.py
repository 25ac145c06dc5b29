import json
import math
import threading
import time

import httpx
import pytest

from errlens import (
    ArgumentError,
    ProtocolError,
    PromptSet,
    RemoteBackend,
    ServerEndpoint,
    ServerError,
    Token,
    TransportError,
)
from errlens.conformance import load_fixtures, run_conformance

FIXTURES = load_fixtures()
INFO = FIXTURES["info"]["response"]


def make_backend(handler, **endpoint_kwargs):
    endpoint = ServerEndpoint("http://scorer.test", **endpoint_kwargs)
    return RemoteBackend(endpoint, transport=httpx.MockTransport(handler))


def fixture_handler(request: httpx.Request) -> httpx.Response:
    """Serves the packaged golden fixtures verbatim."""
    if request.url.path == "/v1/info":
        return httpx.Response(200, json=INFO)
    body = json.loads(request.content)
    if request.url.path == "/v1/score":
        if not body.get("target"):
            return httpx.Response(
                400, json={"error": {"code": "invalid_request", "message": "empty target"}}
            )
        return httpx.Response(200, json=FIXTURES["score"]["response"])
    if request.url.path == "/v1/score_batch":
        results = FIXTURES["score_batch"]["response"]["results"]
        return httpx.Response(200, json={"results": results[: len(body["items"])]})
    if request.url.path == "/v1/topk":
        return httpx.Response(200, json=FIXTURES["topk"]["response"])
    return httpx.Response(404, json={"error": {"code": "not_found", "message": "?"}})


class TestEndpoint:
    def test_relative_url_rejected(self):
        with pytest.raises(ArgumentError):
            ServerEndpoint("scorer.test/v1")

    def test_bad_limits_rejected(self):
        with pytest.raises(ArgumentError):
            ServerEndpoint("http://scorer.test", max_in_flight=0)
        with pytest.raises(ArgumentError):
            ServerEndpoint("http://scorer.test", retries=-1)


class TestScoreParsing:
    def test_golden_fixture_parsed_exactly(self):
        fx = FIXTURES["score"]
        with make_backend(fixture_handler) as backend:
            seq = backend.score(fx["request"]["condition"], fx["request"]["target"])
        assert [t.surface for t in seq.tokens] == fx["response"]["tokens"]
        assert list(seq.logprobs) == fx["response"]["logprobs"]
        assert seq.mean == sum(fx["response"]["logprobs"]) / 7

    def test_tokens_concatenate_to_target(self):
        fx = FIXTURES["score"]
        with make_backend(fixture_handler) as backend:
            seq = backend.score(fx["request"]["condition"], fx["request"]["target"])
            assert backend.detokenize(seq.tokens) == fx["request"]["target"]

    def test_empty_target_fails_without_network(self):
        calls = []

        def handler(request):
            calls.append(request.url.path)
            return httpx.Response(200, json=INFO)

        with make_backend(handler) as backend:
            with pytest.raises(ArgumentError):
                backend.score("cond", "")
        assert calls == []

    def test_length_mismatch_is_protocol_error(self):
        def handler(request):
            return httpx.Response(
                200, json={"tokens": ["a", "b"], "logprobs": [-1.0], "model_id": "m"}
            )

        with make_backend(handler) as backend:
            with pytest.raises(ProtocolError, match="mismatch"):
                backend.score("c", "t")

    def test_non_finite_logprob_rejected(self):
        def handler(request):
            return httpx.Response(
                200,
                content=b'{"tokens": ["a"], "logprobs": [null], "model_id": "m"}',
                headers={"content-type": "application/json"},
            )

        with make_backend(handler) as backend:
            with pytest.raises(ProtocolError):
                backend.score("c", "t")

    def test_missing_field_is_protocol_error(self):
        def handler(request):
            return httpx.Response(200, json={"tokens": ["a"], "logprobs": [-1.0]})

        with make_backend(handler) as backend:
            with pytest.raises(ProtocolError, match="missing"):
                backend.score("c", "t")


class TestTopk:
    def test_golden_fixture(self):
        fx = FIXTURES["topk"]
        with make_backend(fixture_handler) as backend:
            cands = backend.topk(
                fx["request"]["condition"],
                [Token.of(t) for t in fx["request"]["prefix_tokens"]],
                fx["request"]["k"],
            )
        assert [(t.surface, lp) for t, lp in cands] == [
            (c["token"], c["logprob"]) for c in fx["response"]["candidates"]
        ]

    def test_missing_candidates_field(self):
        def handler(request):
            if request.url.path == "/v1/info":
                return httpx.Response(200, json=INFO)
            return httpx.Response(200, json={"model_id": "m"})

        with make_backend(handler) as backend:
            with pytest.raises(ProtocolError, match="candidates"):
                backend.topk("c", [Token.of("a")], 3)


class TestBatch:
    def test_chunked_by_server_max_batch(self):
        batch_sizes = []

        def handler(request):
            if request.url.path == "/v1/info":
                return httpx.Response(200, json={"model_id": "m", "max_batch": 2})
            items = json.loads(request.content)["items"]
            batch_sizes.append(len(items))
            row = FIXTURES["score"]["response"]
            return httpx.Response(200, json={"results": [row] * len(items)})

        items = [("c", f"t{i}", PromptSet.empty()) for i in range(5)]
        with make_backend(handler) as backend:
            results = backend.score_batch(items)
        assert len(results) == 5
        assert batch_sizes == [2, 2, 1]

    def test_result_count_mismatch(self):
        def handler(request):
            if request.url.path == "/v1/info":
                return httpx.Response(200, json=INFO)
            return httpx.Response(200, json={"results": []})

        with make_backend(handler) as backend:
            with pytest.raises(ProtocolError, match="batch"):
                backend.score_batch([("c", "t", PromptSet.empty())])


class TestTransport:
    def test_retries_then_succeeds(self):
        attempts = []

        def handler(request):
            attempts.append(1)
            if len(attempts) < 3:
                raise httpx.ConnectError("refused")
            return httpx.Response(200, json=FIXTURES["score"]["response"])

        with make_backend(handler, retries=2) as backend:
            seq = backend.score("c", "t")
        assert len(attempts) == 3
        assert len(seq.tokens) == 7

    def test_retries_exhausted_raise_transport_error(self):
        def handler(request):
            raise httpx.ConnectTimeout("slow")

        with make_backend(handler, retries=1) as backend:
            with pytest.raises(TransportError, match="2 attempts"):
                backend.score("c", "t")

    def test_http_error_status_raises_server_error(self):
        def handler(request):
            return httpx.Response(
                503, json={"error": {"code": "overloaded", "message": "busy"}}
            )

        with make_backend(handler) as backend:
            with pytest.raises(ServerError) as exc_info:
                backend.score("c", "t")
        assert exc_info.value.status == 503
        assert "overloaded" in exc_info.value.body

    def test_server_error_not_retried(self):
        attempts = []

        def handler(request):
            attempts.append(1)
            return httpx.Response(500, json={"error": {"code": "x", "message": "y"}})

        with make_backend(handler, retries=3) as backend:
            with pytest.raises(ServerError):
                backend.score("c", "t")
        assert len(attempts) == 1

    def test_auth_token_sent_as_bearer(self):
        seen = []

        def handler(request):
            seen.append(request.headers.get("authorization"))
            return httpx.Response(200, json=FIXTURES["score"]["response"])

        with make_backend(handler, auth_token="sekret") as backend:
            backend.score("c", "t")
        assert seen == ["Bearer sekret"]

    def test_max_in_flight_bounds_concurrency(self):
        lock = threading.Lock()
        state = {"active": 0, "peak": 0}

        def handler(request):
            with lock:
                state["active"] += 1
                state["peak"] = max(state["peak"], state["active"])
            time.sleep(0.02)
            with lock:
                state["active"] -= 1
            return httpx.Response(200, json=FIXTURES["score"]["response"])

        with make_backend(handler, max_in_flight=2) as backend:
            threads = [
                threading.Thread(target=backend.score, args=("c", f"t{i}"))
                for i in range(8)
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        assert state["peak"] <= 2


class TestInfoCache:
    def test_info_fetched_once(self):
        calls = []

        def handler(request):
            calls.append(request.url.path)
            return httpx.Response(200, json=INFO)

        with make_backend(handler) as backend:
            assert backend.model_id == "conformance-fixture"
            assert backend.max_batch == 4
            backend.info()
        assert calls == ["/v1/info"]


class TestConformanceRunner:
    def test_all_checks_pass_against_fixture_server(self, monkeypatch):
        transport = httpx.MockTransport(fixture_handler)
        original_init = RemoteBackend.__init__

        def patched(self, endpoint, _transport=None):
            original_init(self, endpoint, transport=transport)

        monkeypatch.setattr(RemoteBackend, "__init__", patched)
        lines = run_conformance(ServerEndpoint("http://scorer.test"))
        assert len(lines) == 5
        assert any("error envelope" in line for line in lines)

    def test_unsorted_topk_fails(self, monkeypatch):
        def handler(request):
            if request.url.path == "/v1/topk":
                return httpx.Response(
                    200,
                    json={
                        "candidates": [
                            {"token": "a", "logprob": -3.0},
                            {"token": "b", "logprob": -1.0},
                        ],
                        "model_id": "m",
                    },
                )
            return fixture_handler(request)

        transport = httpx.MockTransport(handler)
        original_init = RemoteBackend.__init__

        def patched(self, endpoint, _transport=None):
            original_init(self, endpoint, transport=transport)

        monkeypatch.setattr(RemoteBackend, "__init__", patched)
        with pytest.raises(ProtocolError, match="descending"):
            run_conformance(ServerEndpoint("http://scorer.test"))
