"""Deterministic, network-free provider doubles.

The chat double answers debiasing prompts with canned rephrasings (or the
original query repeated) and captioning prompts with canned captions keyed by
the sha256 of the frame bytes. The embedding double is a seeded signed
feature-hashing of the lower-cased token multiset.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from groundline.gateway.cache import canonical_json
from groundline.gateway.messages import ChatRequest

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def request_fingerprint(request: ChatRequest) -> str:
    """sha256 over the request's model, messages (images by digest) and temperature."""
    body = {"model": request.model_id, "messages": request.identity(), "temperature": request.temperature}
    return hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()


@dataclass
class OfflineChatProvider:
    """Canned-response chat double.

    Lookup order: exact request fingerprint in ``responses``; for image
    requests, the frame digest in ``captions`` (else ``"frame <digest[:12]>"``);
    for debiasing requests, the raw query in ``rephrasings`` (else the query
    echoed ``n_q`` times).
    """

    captions: dict[str, str] = field(default_factory=dict)
    rephrasings: dict[str, list[str]] = field(default_factory=dict)
    responses: dict[str, str] = field(default_factory=dict)
    calls: int = 0

    @classmethod
    def from_config(cls, config: Mapping[str, Any] | None) -> OfflineChatProvider:
        config = config or {}
        return cls(
            captions=dict(config.get("captions", {})),
            rephrasings={k: list(v) for k, v in config.get("rephrasings", {}).items()},
            responses=dict(config.get("responses", {})),
        )

    @classmethod
    def load(cls, path: str | Path) -> OfflineChatProvider:
        return cls.from_config(json.loads(Path(path).read_text(encoding="utf-8")))

    def complete(self, request: ChatRequest) -> str:
        self.calls += 1
        fingerprint = request_fingerprint(request)
        if fingerprint in self.responses:
            return self.responses[fingerprint]
        images = [m.image_sha256 for m in request.messages if m.image is not None]
        if images:
            digest = images[-1]
            return self.captions.get(digest, f"frame {digest[:12]}")
        query = request.meta.get("query")
        if query is None:
            return request.user_text()
        n_q = int(request.meta.get("n_q", 1))
        items = self.rephrasings.get(query) or [query] * n_q
        return "\n".join(f"{i}. {text}" for i, text in enumerate(items, start=1))


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class OfflineEmbedProvider:
    dim: int = 512
    seed: int = 0
    calls: int = 0

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValueError("embedding dimension must be >= 2")
        self._key = self.seed.to_bytes(8, "little", signed=True)

    def _bucket(self, token: str) -> tuple[int, float]:
        h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key).digest(), "little")
        return (h >> 1) % self.dim, (1.0 if h & 1 else -1.0)

    def vector(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        tokens = tokenize(text) or [text]
        for tok in tokens:
            idx, sign = self._bucket(tok)
            vec[idx] += sign
        if not vec.any():
            # opposite signs cancelled; fall back to the whole string
            idx, sign = self._bucket("\x00" + text)
            vec[idx] = sign
        return vec / np.linalg.norm(vec)

    def embed(self, texts: Sequence[str], model_id: str) -> list[list[float]]:
        self.calls += 1
        return [self.vector(t).tolist() for t in texts]
