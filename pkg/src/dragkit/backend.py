"""Chat generation backends: live OpenAI-compatible endpoint, deterministic
replay from fixtures, scripted mocks, and request recording.

Replay fixtures are JSONL rows {model, prompt_sha256, sample_index, text};
lookups key on the SHA-256 of the exact prompt string, so a replayed pipeline
is byte-deterministic.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import requests

log = logging.getLogger(__name__)

API_KEY_ENV = "DRAG_API_KEY"


class BackendError(Exception):
    pass


class TransportError(BackendError):
    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class FixtureMiss(BackendError):
    def __init__(self, prompt_hash: str, index: int = 0):
        super().__init__(f"no fixture entry for prompt {prompt_hash[:12]}... index {index}")
        self.prompt_hash = prompt_hash
        self.index = index


@dataclass(frozen=True)
class SamplingConfig:
    temperature: float = 0.6
    top_p: float = 0.95
    top_k: int | None = None
    max_tokens: int = 32768
    n_samples: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")


# Per-model sampling defaults (temperature, top_p, top_k, max output tokens).
MODEL_SAMPLING: dict[str, SamplingConfig] = {
    "Qwen/Qwen3-8B": SamplingConfig(0.6, 0.95, 20, 32768),
    "Qwen/Qwen3-32B": SamplingConfig(0.6, 0.95, 20, 32768),
    "nvidia/OpenReasoning-Nemotron-7B": SamplingConfig(0.6, 0.95, None, 65536),
    "nvidia/OpenReasoning-Nemotron-32B": SamplingConfig(0.6, 0.95, None, 65536),
    "openai/gpt-oss-20b": SamplingConfig(1.0, 1.0, 40, 32768),
    "openai/gpt-oss-120b": SamplingConfig(1.0, 1.0, 40, 32768),
    "deepseek-ai/DeepSeek-R1-Distill-Llama-8B": SamplingConfig(0.6, 0.95, None, 32768),
    "deepseek-ai/DeepSeek-R1-Distill-Qwen-7B": SamplingConfig(0.6, 0.95, None, 32768),
}

_FALLBACK_SAMPLING = SamplingConfig()


def default_sampling(model: str, **overrides) -> SamplingConfig:
    """Per-model default sampling, with keyword overrides applied."""
    base = MODEL_SAMPLING.get(model, _FALLBACK_SAMPLING)
    return replace(base, **overrides) if overrides else base


@dataclass(frozen=True)
class ChatRequest:
    model: str
    message: str  # single user turn
    sampling: SamplingConfig = field(default_factory=SamplingConfig)


@dataclass(frozen=True)
class ChatResponse:
    texts: tuple[str, ...]
    finish_reasons: tuple[str, ...]
    prompt_tokens: int | None = None
    completion_tokens: int | None = None

    @property
    def truncated(self) -> tuple[bool, ...]:
        # Truncation is flagged, not an error.
        return tuple(r == "length" for r in self.finish_reasons)


def prompt_hash(message: str) -> str:
    return hashlib.sha256(message.encode("utf-8")).hexdigest()


class Backend:
    def generate(self, request: ChatRequest) -> ChatResponse:
        raise NotImplementedError


class OpenAIBackend(Backend):
    """POSTs to <base_url>/v1/chat/completions with retry/backoff on 429 and 5xx.

    Exponential backoff: base 1s, factor 2, up to 5 attempts, with jitter.
    top_k is only sent when the endpoint is configured to accept it
    (pass_top_k=True); otherwise it is dropped with a one-time warning.
    """

    def __init__(self, base_url: str, api_key: str | None = None, *,
                 pass_top_k: bool = False, max_attempts: int = 5,
                 backoff_base: float = 1.0, backoff_factor: float = 2.0,
                 timeout: float = 600.0, session=None,
                 sleep: Callable[[float], None] = time.sleep,
                 rng: random.Random | None = None):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.pass_top_k = pass_top_k
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_factor = backoff_factor
        self.timeout = timeout
        self._session = session if session is not None else requests.Session()
        self._sleep = sleep
        self._rng = rng if rng is not None else random.Random()
        self._warned_top_k = False

    def _payload(self, request: ChatRequest) -> dict:
        s = request.sampling
        payload = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.message}],
            "temperature": s.temperature,
            "top_p": s.top_p,
            "max_tokens": s.max_tokens,
            "n": s.n_samples,
        }
        if s.seed is not None:
            payload["seed"] = s.seed
        if s.top_k is not None:
            if self.pass_top_k:
                payload["top_k"] = s.top_k
            elif not self._warned_top_k:
                log.warning("endpoint %s not configured for top_k; dropping it", self.base_url)
                self._warned_top_k = True
        return payload

    def generate(self, request: ChatRequest) -> ChatResponse:
        url = f"{self.base_url}/v1/chat/completions"
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        payload = self._payload(request)
        last = "no attempt made"
        for attempt in range(self.max_attempts):
            if attempt:
                delay = self.backoff_base * self.backoff_factor ** (attempt - 1)
                self._sleep(delay * (1.0 + self._rng.random()))
            try:
                resp = self._session.post(url, json=payload, headers=headers,
                                          timeout=self.timeout)
            except requests.RequestException as exc:
                last = f"{type(exc).__name__}: {exc}"
                log.warning("request failed (%s), attempt %d/%d", last, attempt + 1,
                            self.max_attempts)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                log.warning("retryable response (%s), attempt %d/%d", last, attempt + 1,
                            self.max_attempts)
                continue
            if resp.status_code != 200:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:500]}",
                                     attempts=attempt + 1)
            body = resp.json()
            choices = body.get("choices", [])
            texts = tuple((c.get("message") or {}).get("content") or "" for c in choices)
            finish = tuple(c.get("finish_reason") or "" for c in choices)
            usage = body.get("usage") or {}
            return ChatResponse(texts=texts, finish_reasons=finish,
                                prompt_tokens=usage.get("prompt_tokens"),
                                completion_tokens=usage.get("completion_tokens"))
        raise TransportError(f"gave up after {self.max_attempts} attempts (last: {last})",
                             attempts=self.max_attempts)


def load_fixture(path: str | Path) -> dict[tuple[str, str, int], str]:
    """Load a JSONL fixture; duplicate (model, hash, index) keys: last write wins."""
    store: dict[tuple[str, str, int], str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            key = (row["model"], row["prompt_sha256"], int(row["sample_index"]))
            if key in store:
                log.warning("duplicate fixture entry for %s at line %d; keeping the later one",
                            key, line_no)
            store[key] = row["text"]
    return store


class ReplayBackend(Backend):
    """Deterministic mock: responses looked up by (model, prompt hash, sample index)."""

    def __init__(self, fixture: str | Path | dict, strict: bool = True):
        self._store = dict(fixture) if isinstance(fixture, dict) else load_fixture(fixture)
        self.strict = strict

    def generate(self, request: ChatRequest) -> ChatResponse:
        h = prompt_hash(request.message)
        texts = []
        for i in range(request.sampling.n_samples):
            key = (request.model, h, i)
            if key in self._store:
                texts.append(self._store[key])
            elif self.strict:
                raise FixtureMiss(h, i)
            else:
                texts.append("")
        return ChatResponse(texts=tuple(texts), finish_reasons=("stop",) * len(texts))


class ScriptedBackend(Backend):
    """Mock driven by a deterministic fn(model, prompt, sample_index) -> text."""

    def __init__(self, fn: Callable[[str, str, int], str]):
        self.fn = fn

    def generate(self, request: ChatRequest) -> ChatResponse:
        texts = tuple(self.fn(request.model, request.message, i)
                      for i in range(request.sampling.n_samples))
        return ChatResponse(texts=texts, finish_reasons=("stop",) * len(texts))


class RecordingBackend(Backend):
    """Wraps a backend and appends every generation to a JSONL fixture file.

    Exact duplicates are skipped so replayed fixtures load without duplicate
    warnings; conflicting texts for the same key are written (last wins on load).
    """

    def __init__(self, inner: Backend, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        self._lock = threading.Lock()
        self._seen: dict[tuple[str, str, int], str] = {}
        self._fh = open(self.path, "w", encoding="utf-8")

    def generate(self, request: ChatRequest) -> ChatResponse:
        resp = self.inner.generate(request)
        h = prompt_hash(request.message)
        with self._lock:
            for i, text in enumerate(resp.texts):
                key = (request.model, h, i)
                if self._seen.get(key) == text:
                    continue
                if key in self._seen:
                    log.warning("conflicting recording for %s; later text wins on replay", key)
                self._seen[key] = text
                row = {"model": request.model, "prompt_sha256": h,
                       "sample_index": i, "text": text}
                self._fh.write(json.dumps(row, ensure_ascii=False) + "\n")
            self._fh.flush()
        return resp

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "RecordingBackend":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def generate_batch(backend: Backend, requests_: Sequence[ChatRequest],
                   max_in_flight: int = 4) -> list[ChatResponse | BackendError]:
    """Run requests concurrently (bounded), preserving order.

    Failures surface per index as BackendError entries instead of aborting
    the batch.
    """
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    results: list[ChatResponse | BackendError | None] = [None] * len(requests_)
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = {pool.submit(backend.generate, req): i
                   for i, req in enumerate(requests_)}
        for fut in as_completed(futures):
            i = futures[fut]
            try:
                results[i] = fut.result()
            except BackendError as exc:
                results[i] = exc
    return results  # type: ignore[return-value]
