from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Optional

DEFAULT_KEY_ENV = "PANCAP_LLM_API_KEY"

PROFILE_KINDS = ("openai-chat", "openai-embed", "sbert", "mock-echo", "mock-replay",
                 "mock-oracle-extractor", "mock-oracle-judge", "mock-negation",
                 "mock-hash-embed", "mock-entity-captioner")


@dataclass(frozen=True)
class ProviderProfile:
    """Connection and rate-limit settings for one model backend."""

    name: str
    kind: str = "openai-chat"
    endpoint: str = "http://localhost:8000/v1"
    model: str = ""
    api_key_env: str = DEFAULT_KEY_ENV
    max_in_flight: int = 4
    timeout: float = 60.0
    retries: int = 3
    backoff_base: float = 0.5
    backoff_factor: float = 2.0
    backoff_max: float = 30.0
    temperature: float = 0.0
    multimodal: bool = False
    cache: bool = True
    cache_dir: Optional[str] = None
    transcript: Optional[str] = None  # mock-replay only

    def __post_init__(self) -> None:
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        if self.retries < 0:
            raise ValueError("retry budget must be non-negative")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")

    def backoff(self, attempt: int) -> float:
        return min(self.backoff_base * self.backoff_factor ** attempt, self.backoff_max)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ProviderProfile":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown profile keys: {sorted(unknown)}")
        return cls(**d)


def load_profiles(source: str | Path | list[dict[str, Any]]) -> dict[str, ProviderProfile]:
    """Profiles by name, from a JSON array (or a file holding one)."""
    data: Any = source
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("profiles", [])
    out: dict[str, ProviderProfile] = {}
    for entry in data:
        prof = ProviderProfile.from_dict(entry)
        if prof.name in out:
            raise ValueError(f"duplicate profile name {prof.name!r}")
        out[prof.name] = prof
    return out
