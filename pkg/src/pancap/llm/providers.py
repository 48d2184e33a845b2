"""Chat-completion and embedding providers.

Every provider funnels requests through the same gateway: a bounded
semaphore caps in-flight requests at ``profile.max_in_flight``, transient
failures are retried with exponential backoff up to ``profile.retries``
times, and replies are cached by content hash (in memory, and optionally on
disk under ``profile.cache_dir``).
"""

from __future__ import annotations

import base64
import hashlib
import json
import mimetypes
import os
import threading
import time
from pathlib import Path
from typing import Any, Callable, Optional, TypeVar, Union

import numpy as np

from ..errors import (
    AuthFailure,
    EmbeddingUnavailable,
    MalformedResponse,
    ProviderTimeout,
    RateLimited,
    TransientProviderError,
)
from .profiles import ProviderProfile
from .prompts import RenderedPrompt

T = TypeVar("T")
PromptLike = Union[RenderedPrompt, str]


def _digest(payload: Any) -> str:
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


class _Gateway:
    default_kind = "mock-echo"

    def __init__(self, profile: Optional[ProviderProfile] = None):
        self.profile = profile or ProviderProfile(name=type(self).__name__, kind=self.default_kind,
                                                  backoff_base=0.0)
        self._slots = threading.BoundedSemaphore(self.profile.max_in_flight)
        self._cache: dict[str, Any] = {}
        self._cache_lock = threading.Lock()
        self.attempts = 0  # total backend calls, failures included
        self._attempts_lock = threading.Lock()
        self.sleep: Callable[[float], None] = time.sleep

    def _call_with_retry(self, fn: Callable[[], T]) -> T:
        attempt = 0
        while True:
            with self._attempts_lock:
                self.attempts += 1
            try:
                with self._slots:
                    return fn()
            except TransientProviderError:
                if attempt >= self.profile.retries:
                    raise
                self.sleep(self.profile.backoff(attempt))
                attempt += 1

    def _cached(self, key: str, compute: Callable[[], T]) -> T:
        if not self.profile.cache:
            return compute()
        with self._cache_lock:
            if key in self._cache:
                return self._cache[key]
        disk = self._disk_path(key)
        if disk is not None and disk.exists():
            value = self._decode(json.loads(disk.read_text(encoding="utf-8")))
        else:
            value = compute()
            if disk is not None:
                disk.parent.mkdir(parents=True, exist_ok=True)
                tmp = disk.with_suffix(".tmp")
                tmp.write_text(json.dumps(self._encode(value)), encoding="utf-8")
                tmp.replace(disk)
        with self._cache_lock:
            return self._cache.setdefault(key, value)

    def _disk_path(self, key: str) -> Optional[Path]:
        if not self.profile.cache_dir:
            return None
        return Path(self.profile.cache_dir) / key[:2] / f"{key}.json"

    def _encode(self, value: Any) -> Any:
        return value

    def _decode(self, stored: Any) -> Any:
        return stored


class ChatProvider(_Gateway):
    """Base chat provider; subclasses implement :meth:`_complete`."""

    def chat(self, prompt: PromptLike, image: Optional[str] = None) -> str:
        if isinstance(prompt, str):
            prompt = RenderedPrompt.from_text(prompt)
        if image is not None and not self.profile.multimodal:
            raise ValueError(f"profile {self.profile.name!r} does not accept image attachments")
        key = _digest({"model": self.profile.model, "kind": self.profile.kind,
                       "temperature": self.profile.temperature,
                       "messages": prompt.to_messages(), "image": image})
        return self._cached(key, lambda: self._call_with_retry(lambda: self._complete(prompt, image)))

    def _complete(self, prompt: RenderedPrompt, image: Optional[str]) -> str:
        raise NotImplementedError


class Embedder(_Gateway):
    """Base embedding provider returning L2-normalised, read-only vectors."""

    default_kind = "mock-hash-embed"

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmbeddingUnavailable("cannot embed empty text")
        key = _digest({"model": self.profile.model, "kind": self.profile.kind, "text": text})
        return self._cached(key, lambda: self._normalise(self._call_with_retry(lambda: self._embed(text))))

    @staticmethod
    def _normalise(vec: Any) -> np.ndarray:
        arr = np.asarray(vec, dtype=np.float64).ravel()
        norm = float(np.linalg.norm(arr))
        if arr.size == 0 or not np.isfinite(norm) or norm == 0.0:
            raise EmbeddingUnavailable("provider returned a zero or invalid vector")
        arr = arr / norm
        arr.flags.writeable = False
        return arr

    def _encode(self, value: Any) -> Any:
        return value.tolist()

    def _decode(self, stored: Any) -> Any:
        arr = np.asarray(stored, dtype=np.float64)
        arr.flags.writeable = False
        return arr

    def _embed(self, text: str) -> Any:
        raise NotImplementedError


# -- HTTP backends (OpenAI-compatible wire format) ----------------------------


def _image_part(image: str) -> dict[str, Any]:
    if image.startswith(("http://", "https://", "data:")):
        url = image
    else:
        path = Path(image)
        mime = mimetypes.guess_type(path.name)[0] or "application/octet-stream"
        url = f"data:{mime};base64,{base64.b64encode(path.read_bytes()).decode('ascii')}"
    return {"type": "image_url", "image_url": {"url": url}}


class _HTTPMixin:
    profile: ProviderProfile

    def _client(self):
        import httpx

        if getattr(self, "_http", None) is None:
            self._http = httpx.Client(timeout=self.profile.timeout)
        return self._http

    def _post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        import httpx

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.profile.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        url = self.profile.endpoint.rstrip("/") + path
        try:
            resp = self._client().post(url, json=payload, headers=headers)
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"{url}: {exc}") from exc
        except httpx.TransportError as exc:
            raise ProviderTimeout(f"{url} unreachable: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthFailure(f"{url} rejected credentials from ${self.profile.api_key_env}")
        if resp.status_code == 429:
            raise RateLimited(f"{url} rate limited the request")
        if resp.status_code >= 500:
            raise TransientProviderError(f"{url} returned {resp.status_code}")
        if resp.status_code >= 400:
            raise MalformedResponse(f"{url} returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise MalformedResponse(f"{url} returned non-JSON body") from exc


class HTTPChatProvider(_HTTPMixin, ChatProvider):
    def _complete(self, prompt: RenderedPrompt, image: Optional[str]) -> str:
        messages: list[dict[str, Any]] = prompt.to_messages()
        if image is not None:
            last = max(i for i, m in enumerate(messages) if m["role"] == "user")
            messages[last] = {"role": "user", "content": [
                {"type": "text", "text": messages[last]["content"]}, _image_part(image)]}
        body = self._post("/chat/completions", {
            "model": self.profile.model, "messages": messages,
            "temperature": self.profile.temperature})
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse("chat completion without choices[0].message.content") from exc
        if not isinstance(content, str):
            raise MalformedResponse("chat completion content is not text")
        return content


class HTTPEmbedder(_HTTPMixin, Embedder):
    def _embed(self, text: str) -> Any:
        body = self._post("/embeddings", {"model": self.profile.model, "input": text})
        try:
            return body["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise EmbeddingUnavailable("embedding response without data[0].embedding") from exc


class SentenceTransformerEmbedder(Embedder):
    """Local SentenceBERT-style encoder (requires ``sentence-transformers``)."""

    def __init__(self, profile: Optional[ProviderProfile] = None):
        super().__init__(profile)
        self._model = None
        self._model_lock = threading.Lock()

    def _embed(self, text: str) -> Any:
        with self._model_lock:
            if self._model is None:
                try:
                    from sentence_transformers import SentenceTransformer
                except ImportError as exc:
                    raise EmbeddingUnavailable("sentence-transformers is not installed") from exc
                self._model = SentenceTransformer(self.profile.model or "all-MiniLM-L6-v2")
            return self._model.encode(text)
