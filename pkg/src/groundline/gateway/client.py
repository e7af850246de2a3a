from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Protocol, Sequence, TypeVar

import numpy as np

from groundline.gateway.cache import CacheKey, ResponseCache
from groundline.gateway.errors import ProviderError, TransportError
from groundline.gateway.messages import ChatRequest, EmbeddingVector

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class ChatProvider(Protocol):
    def complete(self, request: ChatRequest) -> str: ...


class EmbedProvider(Protocol):
    def embed(self, texts: Sequence[str], model_id: str) -> list[list[float]]: ...


class Gateway:
    """Caching front-end over a chat provider and an embedding provider.

    Every response is stored in ``cache`` before it is returned, so a second
    run over the same inputs makes no provider calls and returns identical
    values. Either provider may be ``None`` when only cached replays are
    expected; a miss then raises :class:`TransportError`.
    """

    def __init__(
        self,
        chat_provider: ChatProvider | None = None,
        embed_provider: EmbedProvider | None = None,
        cache: ResponseCache | None = None,
        *,
        max_workers: int = 4,
        embed_batch_size: int = 64,
    ) -> None:
        self.chat_provider = chat_provider
        self.embed_provider = embed_provider
        self.cache = cache if cache is not None else ResponseCache(None)
        self.max_workers = max(1, max_workers)
        self.embed_batch_size = max(1, embed_batch_size)
        self._dims: dict[str, int] = {}
        self._dims_lock = threading.Lock()

    def chat(self, request: ChatRequest, stage: str | None = None, salt: str = "") -> str:
        stage = stage or ("caption" if request.has_image else "debias")
        identity = request.identity()
        key = CacheKey.build(stage, request.model_id, identity, request.temperature, salt)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        with self.cache.lock_for(key):
            hit = self.cache.get(key)
            if hit is not None:
                return hit
            if self.chat_provider is None:
                raise TransportError(f"cache miss for {key} and no chat provider configured")
            text = self.chat_provider.complete(request)
            if not isinstance(text, str):
                raise ProviderError(f"chat provider returned {type(text).__name__}, expected str")
            record = {"model": request.model_id, "messages": identity, "temperature": request.temperature}
            if salt:
                record["salt"] = salt
            if request.meta:
                record["meta"] = dict(request.meta)
            self.cache.put(key, record, text)
        return text

    def embed(self, texts: Sequence[str], model_id: str) -> list[EmbeddingVector]:
        texts = list(texts)
        for t in texts:
            if not isinstance(t, str) or not t.strip():
                raise ValueError("embedding inputs must be non-empty strings")
        keys = {t: CacheKey.build("embed", model_id, t) for t in dict.fromkeys(texts)}
        found: dict[str, list[float]] = {}
        missing: list[str] = []
        for t, key in keys.items():
            hit = self.cache.get(key)
            if hit is None:
                missing.append(t)
            else:
                found[t] = hit
        if missing:
            if self.embed_provider is None:
                raise TransportError(f"{len(missing)} embedding cache misses and no embedding provider configured")
            batches = [missing[i:i + self.embed_batch_size] for i in range(0, len(missing), self.embed_batch_size)]
            for batch, vectors in zip(batches, self.map(lambda b: self.embed_provider.embed(b, model_id), batches)):
                if len(vectors) != len(batch):
                    raise ProviderError(f"asked for {len(batch)} embeddings, got {len(vectors)}")
                for t, vec in zip(batch, vectors):
                    unit = self._normalize(vec, model_id)
                    self.cache.put(keys[t], {"model": model_id, "text": t}, unit)
                    found[t] = unit
        return [EmbeddingVector(np.asarray(found[t]), model_id) for t in texts]

    def _normalize(self, vec: Sequence[float], model_id: str) -> list[float]:
        arr = np.asarray(vec, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0 or not np.all(np.isfinite(arr)):
            raise ProviderError("embedding must be a non-empty finite vector")
        norm = np.linalg.norm(arr)
        if norm == 0:
            raise ProviderError("provider returned a zero embedding")
        with self._dims_lock:
            dim = self._dims.setdefault(model_id, arr.size)
        if dim != arr.size:
            raise ProviderError(f"model {model_id} returned dimension {arr.size}, expected {dim}")
        return (arr / norm).tolist()

    def map(self, fn, items: Iterable[T]) -> list[R]:
        """Order-preserving concurrent map bounded by ``max_workers``."""
        items = list(items)
        if self.max_workers == 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            return list(pool.map(fn, items))
