"""Run configuration: JSON-backed settings for backends and sampling."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .backend import (Backend, default_sampling, OpenAIBackend, ReplayBackend,
                      SamplingConfig)


@dataclass(frozen=True)
class RunConfig:
    """Settings shared by the command-line entry points.

    backend: "openai" for a live OpenAI-compatible server, "replay" for a
    recorded fixture.
    """
    backend: str = "openai"
    base_url: str = "http://localhost:8000"
    fixture: str | None = None
    strict_replay: bool = True
    pass_top_k: bool = False
    seed: int = 0
    n_samples: int = 16
    max_in_flight: int = 4
    sampling_overrides: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def sampling_for(self, model: str) -> SamplingConfig:
        overrides = self.sampling_overrides.get(model, {})
        return default_sampling(model, **overrides)

    def make_backend(self) -> Backend:
        if self.backend == "replay":
            if not self.fixture:
                raise ValueError("replay backend needs a fixture path")
            return ReplayBackend(self.fixture, strict=self.strict_replay)
        if self.backend == "openai":
            return OpenAIBackend(self.base_url, pass_top_k=self.pass_top_k)
        raise ValueError(f"unknown backend kind {self.backend!r}")
