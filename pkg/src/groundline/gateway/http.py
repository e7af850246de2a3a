"""HTTP clients for OpenAI-compatible ``/chat/completions`` and ``/embeddings`` endpoints."""

from __future__ import annotations

import logging
import os
import random
import threading
import time
from typing import Any, Callable, Sequence

import httpx

from groundline.gateway.errors import ProviderError, TransportError
from groundline.gateway.messages import ChatRequest

logger = logging.getLogger(__name__)

CHAT_URL_ENV = "GROUNDLINE_CHAT_BASE_URL"
EMBED_URL_ENV = "GROUNDLINE_EMBED_BASE_URL"
API_KEY_ENV = "GROUNDLINE_API_KEY"

_RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class _HttpBase:
    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        *,
        timeout: float = 120.0,
        max_attempts: int = 3,
        backoff_base: float = 1.0,
        backoff_factor: float = 2.0,
        jitter: float = 0.25,
        max_concurrency: int = 4,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.backoff_factor = backoff_factor
        self.jitter = jitter
        self._client = client or httpx.Client(timeout=timeout)
        self._slots = threading.BoundedSemaphore(max_concurrency)
        self._sleep = sleep
        self._rng = random.Random()
        self.calls = 0

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _delay(self, attempt: int) -> float:
        delay = self.backoff_base * self.backoff_factor ** (attempt - 1)
        return delay + self._rng.uniform(0.0, self.jitter * delay)

    def _post(self, path: str, body: dict[str, Any]) -> Any:
        url = f"{self.base_url}{path}"
        last: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            with self._slots:
                self.calls += 1
                try:
                    resp = self._client.post(url, json=body, headers=self._headers())
                except httpx.HTTPError as exc:
                    last = exc
                    resp = None
            if resp is not None:
                if resp.status_code < 400:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise ProviderError(f"{url} returned non-JSON body") from exc
                last = TransportError(f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}")
                if resp.status_code not in _RETRYABLE_STATUS:
                    raise last
            if attempt < self.max_attempts:
                delay = self._delay(attempt)
                logger.warning("POST %s failed (attempt %d/%d): %s; retrying in %.2fs",
                               url, attempt, self.max_attempts, last, delay)
                self._sleep(delay)
        if isinstance(last, TransportError):
            raise last
        raise TransportError(f"POST {url} failed after {self.max_attempts} attempts: {last}") from last

    def close(self) -> None:
        self._client.close()


class HttpChatProvider(_HttpBase):
    @classmethod
    def from_env(cls, **kwargs: Any) -> HttpChatProvider:
        url = os.environ.get(CHAT_URL_ENV)
        if not url:
            raise TransportError(f"no chat endpoint configured; set {CHAT_URL_ENV}")
        return cls(url, os.environ.get(API_KEY_ENV), **kwargs)

    def complete(self, request: ChatRequest) -> str:
        payload = self._post("/chat/completions", request.to_wire())
        try:
            content = payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat response: {str(payload)[:200]}") from exc
        if not isinstance(content, str):
            raise ProviderError("chat response content is not a string")
        return content


class HttpEmbedProvider(_HttpBase):
    @classmethod
    def from_env(cls, **kwargs: Any) -> HttpEmbedProvider:
        url = os.environ.get(EMBED_URL_ENV)
        if not url:
            raise TransportError(f"no embedding endpoint configured; set {EMBED_URL_ENV}")
        return cls(url, os.environ.get(API_KEY_ENV), **kwargs)

    def embed(self, texts: Sequence[str], model_id: str) -> list[list[float]]:
        payload = self._post("/embeddings", {"model": model_id, "input": list(texts)})
        try:
            data = payload["data"]
            # servers may return items out of order; "index" is authoritative when present
            if all(isinstance(d, dict) and "index" in d for d in data):
                data = sorted(data, key=lambda d: d["index"])
            vectors = [[float(x) for x in d["embedding"]] for d in data]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderError(f"malformed embedding response: {str(payload)[:200]}") from exc
        if len(vectors) != len(texts):
            raise ProviderError(f"asked for {len(texts)} embeddings, got {len(vectors)}")
        return vectors
