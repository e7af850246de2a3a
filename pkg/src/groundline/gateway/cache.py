"""Content-addressed, checksummed on-disk record store for provider responses.

Layout: ``{cache_dir}/{stage}/{hash[:2]}/{hash}.json``, one record per key.
Each record holds ``key``, ``request``, ``response`` and ``checksum`` (sha256 of
the canonical JSON of the other three fields).
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from groundline.gateway.errors import CacheCorruption

STAGES = ("debias", "caption", "embed")


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


@dataclass(frozen=True, slots=True)
class CacheKey:
    stage: str
    content_hash: str

    @classmethod
    def build(cls, stage: str, model_id: str, payload: Any, temperature: float | None = None, salt: str = "") -> CacheKey:
        if stage not in STAGES:
            raise ValueError(f"unknown cache stage {stage!r}")
        identity = {
            "stage": stage,
            "model": model_id,
            "payload": payload,
            "temperature": None if temperature is None else float(temperature),
            "salt": salt,
        }
        digest = hashlib.sha256(canonical_json(identity).encode("utf-8")).hexdigest()
        return cls(stage, digest)

    def __str__(self) -> str:
        return f"{self.stage}:{self.content_hash}"


def _checksum(key: str, request: Any, response: Any) -> str:
    body = canonical_json({"key": key, "request": request, "response": response})
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


class ResponseCache:
    """Append-only record store. ``None`` cache_dir gives a process-local store."""

    def __init__(self, cache_dir: str | os.PathLike[str] | None) -> None:
        self.root = Path(cache_dir) if cache_dir is not None else None
        self._memory: dict[str, Any] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self.hits = 0
        self.misses = 0

    def path_for(self, key: CacheKey) -> Path:
        if self.root is None:
            raise ValueError("in-memory cache has no paths")
        return self.root / key.stage / key.content_hash[:2] / f"{key.content_hash}.json"

    def lock_for(self, key: CacheKey) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(str(key), threading.Lock())

    def get(self, key: CacheKey) -> Any | None:
        if self.root is None:
            found = self._memory.get(str(key))
        else:
            path = self.path_for(key)
            try:
                raw = path.read_text(encoding="utf-8")
            except FileNotFoundError:
                found = None
            else:
                found = self._verify(path, raw, key)
        if found is None:
            self.misses += 1
        else:
            self.hits += 1
        return found

    def _verify(self, path: Path, raw: str, key: CacheKey) -> Any:
        try:
            record = json.loads(raw)
            stored = record["checksum"]
            expected = _checksum(record["key"], record["request"], record["response"])
        except (ValueError, KeyError, TypeError) as exc:
            raise CacheCorruption(f"unreadable cache record {path}: {exc}") from exc
        if stored != expected or record["key"] != str(key):
            raise CacheCorruption(f"checksum mismatch in cache record {path}")
        return record["response"]

    def put(self, key: CacheKey, request: Any, response: Any) -> None:
        if self.root is None:
            self._memory[str(key)] = response
            return
        path = self.path_for(key)
        if path.exists():
            return
        record = {
            "key": str(key),
            "request": request,
            "response": response,
            "checksum": _checksum(str(key), request, response),
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(canonical_json(record))
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
