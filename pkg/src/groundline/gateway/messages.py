from __future__ import annotations

import base64
import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

ROLES = ("system", "user")


@dataclass(frozen=True, slots=True)
class Message:
    role: str
    content: str
    image: bytes | None = field(default=None, repr=False)
    image_mime: str = "image/jpeg"

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"message role must be one of {ROLES}, got {self.role!r}")

    @property
    def image_sha256(self) -> str | None:
        return None if self.image is None else hashlib.sha256(self.image).hexdigest()

    def to_wire(self) -> dict[str, Any]:
        if self.image is None:
            return {"role": self.role, "content": self.content}
        url = f"data:{self.image_mime};base64," + base64.b64encode(self.image).decode("ascii")
        return {
            "role": self.role,
            "content": [
                {"type": "text", "text": self.content},
                {"type": "image_url", "image_url": {"url": url}},
            ],
        }

    def identity(self) -> dict[str, Any]:
        out: dict[str, Any] = {"role": self.role, "content": self.content}
        if self.image is not None:
            out["image_sha256"] = self.image_sha256
        return out


@dataclass(frozen=True)
class ChatRequest:
    """One chat-completion call.

    ``meta`` carries hints for offline doubles (e.g. the raw query) and is
    neither sent on the wire nor part of the cache identity.
    """

    model_id: str
    messages: tuple[Message, ...]
    temperature: float = 0.2
    meta: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))
        if not any(m.role == "user" for m in self.messages):
            raise ValueError("a chat request needs at least one user message")
        if not math.isfinite(self.temperature) or not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be finite and in [0, 2], got {self.temperature}")

    @property
    def has_image(self) -> bool:
        return any(m.image is not None for m in self.messages)

    def user_text(self) -> str:
        return [m.content for m in self.messages if m.role == "user"][-1]

    def to_wire(self) -> dict[str, Any]:
        return {
            "model": self.model_id,
            "messages": [m.to_wire() for m in self.messages],
            "temperature": self.temperature,
        }

    def identity(self) -> list[dict[str, Any]]:
        return [m.identity() for m in self.messages]


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    model_id: str

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    @classmethod
    def normalized(cls, values: Sequence[float], model_id: str) -> EmbeddingVector:
        arr = np.asarray(values, dtype=np.float64)
        n = np.linalg.norm(arr)
        if n == 0 or not np.isfinite(n):
            raise ValueError("cannot normalise a zero or non-finite embedding")
        return cls(arr / n, model_id)
