"""Backends: request payloads, retry behavior, fixture replay, recording,
and bounded-concurrency batch generation."""

import json
import logging
import random
import threading

import pytest
import requests

from dragkit.backend import (API_KEY_ENV, BackendError, ChatRequest,
                             ChatResponse, default_sampling, FixtureMiss,
                             generate_batch, load_fixture, MODEL_SAMPLING,
                             OpenAIBackend, prompt_hash, RecordingBackend,
                             ReplayBackend, SamplingConfig, ScriptedBackend,
                             TransportError)


class FakeResponse:
    def __init__(self, status_code=200, body=None, text=""):
        self.status_code = status_code
        self._body = body or {}
        self.text = text

    def json(self):
        return self._body


def ok_body(texts, finish="stop"):
    return {
        "choices": [{"message": {"content": t}, "finish_reason": finish}
                    for t in texts],
        "usage": {"prompt_tokens": 11, "completion_tokens": 7},
    }


class FakeSession:
    """Yields queued responses (or exceptions) and records each POST."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers})
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome


def make_backend(session, **kwargs):
    kwargs.setdefault("sleep", lambda _: None)
    kwargs.setdefault("rng", random.Random(0))
    return OpenAIBackend("http://test", api_key="k", session=session, **kwargs)


class TestSamplingConfig:
    def test_defaults_table(self):
        qwen = MODEL_SAMPLING["Qwen/Qwen3-8B"]
        assert (qwen.temperature, qwen.top_p, qwen.top_k, qwen.max_tokens) == \
            (0.6, 0.95, 20, 32768)
        oss = MODEL_SAMPLING["openai/gpt-oss-20b"]
        assert (oss.temperature, oss.top_p, oss.top_k) == (1.0, 1.0, 40)
        nemotron = MODEL_SAMPLING["nvidia/OpenReasoning-Nemotron-7B"]
        assert nemotron.top_k is None
        assert nemotron.max_tokens == 65536

    def test_default_sampling_overrides(self):
        s = default_sampling("Qwen/Qwen3-8B", temperature=0.1, n_samples=4)
        assert s.temperature == 0.1
        assert s.n_samples == 4
        assert s.top_p == 0.95  # untouched

    def test_unknown_model_gets_fallback(self):
        s = default_sampling("some/unknown")
        assert s.temperature == 0.6

    @pytest.mark.parametrize("kwargs", [
        {"temperature": -0.1}, {"top_p": 0.0}, {"top_p": 1.5},
        {"max_tokens": 0}, {"n_samples": 0},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            SamplingConfig(**kwargs)


class TestOpenAIBackend:
    def test_payload_shape(self):
        session = FakeSession([FakeResponse(body=ok_body(["hi"]))])
        be = make_backend(session)
        req = ChatRequest("m", "hello", SamplingConfig(0.5, 0.9, None, 128,
                                                       n_samples=2, seed=7))
        res = be.generate(req)
        sent = session.calls[0]["json"]
        assert sent == {"model": "m",
                        "messages": [{"role": "user", "content": "hello"}],
                        "temperature": 0.5, "top_p": 0.9, "max_tokens": 128,
                        "n": 2, "seed": 7}
        assert session.calls[0]["url"] == "http://test/v1/chat/completions"
        assert session.calls[0]["headers"]["Authorization"] == "Bearer k"
        assert res.texts == ("hi",)
        assert res.prompt_tokens == 11

    def test_top_k_dropped_with_one_warning(self, caplog):
        session = FakeSession([FakeResponse(body=ok_body(["a"])),
                               FakeResponse(body=ok_body(["b"]))])
        be = make_backend(session)
        req = ChatRequest("m", "x", SamplingConfig(top_k=40))
        with caplog.at_level(logging.WARNING):
            be.generate(req)
            be.generate(req)
        assert "top_k" not in session.calls[0]["json"]
        warnings = [r for r in caplog.records if "top_k" in r.getMessage()]
        assert len(warnings) == 1

    def test_top_k_passed_when_enabled(self):
        session = FakeSession([FakeResponse(body=ok_body(["a"]))])
        be = make_backend(session, pass_top_k=True)
        be.generate(ChatRequest("m", "x", SamplingConfig(top_k=40)))
        assert session.calls[0]["json"]["top_k"] == 40

    def test_api_key_from_environment(self, monkeypatch):
        monkeypatch.setenv(API_KEY_ENV, "env-secret")
        session = FakeSession([FakeResponse(body=ok_body(["a"]))])
        be = OpenAIBackend("http://test", session=session,
                           sleep=lambda _: None)
        be.generate(ChatRequest("m", "x"))
        assert session.calls[0]["headers"]["Authorization"] == "Bearer env-secret"

    def test_retries_on_429_then_succeeds(self):
        session = FakeSession([FakeResponse(429), FakeResponse(500),
                               FakeResponse(body=ok_body(["ok"]))])
        sleeps = []
        be = make_backend(session, sleep=sleeps.append)
        res = be.generate(ChatRequest("m", "x"))
        assert res.texts == ("ok",)
        assert len(session.calls) == 3
        assert len(sleeps) == 2
        assert sleeps[1] > sleeps[0]  # exponential growth despite jitter

    def test_retries_on_connection_error(self):
        session = FakeSession([requests.ConnectionError("down"),
                               FakeResponse(body=ok_body(["ok"]))])
        be = make_backend(session)
        assert be.generate(ChatRequest("m", "x")).texts == ("ok",)

    def test_gives_up_after_max_attempts(self):
        session = FakeSession([FakeResponse(503)] * 3)
        be = make_backend(session, max_attempts=3)
        with pytest.raises(TransportError) as exc:
            be.generate(ChatRequest("m", "x"))
        assert exc.value.attempts == 3
        assert len(session.calls) == 3

    def test_client_error_fails_immediately(self):
        session = FakeSession([FakeResponse(400, text="bad request")])
        be = make_backend(session)
        with pytest.raises(TransportError) as exc:
            be.generate(ChatRequest("m", "x"))
        assert len(session.calls) == 1
        assert "400" in str(exc.value)

    def test_truncation_flagged_not_raised(self):
        session = FakeSession([FakeResponse(body=ok_body(["partial"],
                                                         finish="length"))])
        be = make_backend(session)
        res = be.generate(ChatRequest("m", "x"))
        assert res.truncated == (True,)


class TestFixtures:
    def write_fixture(self, path, rows):
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")

    def test_load_and_replay(self, tmp_path):
        h = prompt_hash("hello")
        path = tmp_path / "fx.jsonl"
        self.write_fixture(path, [
            {"model": "m", "prompt_sha256": h, "sample_index": 0, "text": "t0"},
            {"model": "m", "prompt_sha256": h, "sample_index": 1, "text": "t1"},
        ])
        be = ReplayBackend(path)
        res = be.generate(ChatRequest("m", "hello",
                                      SamplingConfig(n_samples=2)))
        assert res.texts == ("t0", "t1")

    def test_duplicate_keys_last_wins(self, tmp_path, caplog):
        h = prompt_hash("p")
        path = tmp_path / "fx.jsonl"
        self.write_fixture(path, [
            {"model": "m", "prompt_sha256": h, "sample_index": 0, "text": "old"},
            {"model": "m", "prompt_sha256": h, "sample_index": 0, "text": "new"},
        ])
        with caplog.at_level(logging.WARNING):
            store = load_fixture(path)
        assert store[("m", h, 0)] == "new"
        assert any("duplicate" in r.getMessage() for r in caplog.records)

    def test_strict_miss_raises(self, tmp_path):
        path = tmp_path / "fx.jsonl"
        self.write_fixture(path, [])
        be = ReplayBackend(path, strict=True)
        with pytest.raises(FixtureMiss):
            be.generate(ChatRequest("m", "unknown"))

    def test_non_strict_returns_empty(self):
        be = ReplayBackend({}, strict=False)
        res = be.generate(ChatRequest("m", "unknown"))
        assert res.texts == ("",)

    def test_recording_round_trip(self, tmp_path):
        path = tmp_path / "rec.jsonl"
        inner = ScriptedBackend(lambda m, p, i: f"{m}|{p}|{i}")
        with RecordingBackend(inner, path) as rec:
            rec.generate(ChatRequest("m", "a", SamplingConfig(n_samples=2)))
            rec.generate(ChatRequest("m", "a", SamplingConfig(n_samples=2)))
            rec.generate(ChatRequest("m", "b"))
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(rows) == 3  # exact duplicates skipped
        replay = ReplayBackend(path)
        res = replay.generate(ChatRequest("m", "a", SamplingConfig(n_samples=2)))
        assert res.texts == ("m|a|0", "m|a|1")

    def test_recording_threadsafe(self, tmp_path):
        path = tmp_path / "rec.jsonl"
        inner = ScriptedBackend(lambda m, p, i: p)
        with RecordingBackend(inner, path) as rec:
            threads = [threading.Thread(
                target=lambda n=n: rec.generate(ChatRequest("m", f"p{n}")))
                for n in range(20)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        rows = path.read_text().splitlines()
        assert len(rows) == 20
        assert all(json.loads(r)["text"] == json.loads(r)["text"] for r in rows)


class TestGenerateBatch:
    def test_preserves_order(self):
        be = ScriptedBackend(lambda m, p, i: p.upper())
        reqs = [ChatRequest("m", f"p{n}") for n in range(10)]
        results = generate_batch(be, reqs, max_in_flight=3)
        assert [r.texts[0] for r in results] == [f"P{n}" for n in range(10)]

    def test_errors_embedded_per_index(self):
        class Flaky(ScriptedBackend):
            def generate(self, request):
                if request.message == "bad":
                    raise TransportError("boom")
                return super().generate(request)

        be = Flaky(lambda m, p, i: p)
        results = generate_batch(be, [ChatRequest("m", "good"),
                                      ChatRequest("m", "bad"),
                                      ChatRequest("m", "good")])
        assert isinstance(results[0], ChatResponse)
        assert isinstance(results[1], BackendError)
        assert isinstance(results[2], ChatResponse)

    def test_invalid_concurrency(self):
        with pytest.raises(ValueError):
            generate_batch(ScriptedBackend(lambda m, p, i: ""), [], 0)

    def test_empty_batch(self):
        assert generate_batch(ScriptedBackend(lambda m, p, i: ""), []) == []
