"""Query-caption cosine similarity and the binary similarity-matrix format."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from groundline._io import atomic_write_bytes
from groundline.captioner import CaptionTrack
from groundline.core import FrameTimeline, SimilarityMatrix
from groundline.gateway import EmbeddingVector, Gateway
from groundline.querygen import DebiasedQuerySet

DEFAULT_EMBED_MODEL = "sentence-transformers/all-mpnet-base-v2"

MATRIX_MAGIC = b"GLSM"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sHII")


class DimensionMismatch(ValueError):
    pass


class ZeroVector(ValueError):
    pass


def cosine(a: EmbeddingVector | np.ndarray, b: EmbeddingVector | np.ndarray) -> float:
    u = np.asarray(getattr(a, "values", a), dtype=np.float64)
    v = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"cannot compare vectors of shape {u.shape} and {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def cosine_matrix(queries: np.ndarray, captions: np.ndarray) -> np.ndarray:
    """Row-wise cosine between two stacks of vectors (any non-zero norms)."""
    q = np.asarray(queries, dtype=np.float64)
    c = np.asarray(captions, dtype=np.float64)
    if q.shape[1] != c.shape[1]:
        raise DimensionMismatch(f"query dim {q.shape[1]} != caption dim {c.shape[1]}")
    qn = np.linalg.norm(q, axis=1, keepdims=True)
    cn = np.linalg.norm(c, axis=1, keepdims=True)
    if not (qn.all() and cn.all()):
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    return np.clip((q / qn) @ (c / cn).T, -1.0, 1.0)


def build_similarity(
    queries: DebiasedQuerySet,
    track: CaptionTrack,
    gateway: Gateway,
    model_id: str = DEFAULT_EMBED_MODEL,
) -> SimilarityMatrix:
    """Embed each rephrasing and caption once and score every pair."""
    q_vecs = gateway.embed(list(queries.rephrasings), model_id)
    c_vecs = gateway.embed(list(track.captions), model_id)
    values = cosine_matrix(np.stack([v.values for v in q_vecs]), np.stack([v.values for v in c_vecs]))
    ids = tuple(f"{queries.original.query_id}:{i}" for i in range(queries.n_q))
    return SimilarityMatrix(values, ids, track.timeline)


def encode_matrix(values: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(values, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError("matrix must be 2-D")
    n_q, n_v = arr.shape
    return _HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, n_q, n_v) + arr.tobytes(order="C")


def decode_matrix(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise ValueError("similarity matrix file is truncated")
    magic, version, n_q, n_v = _HEADER.unpack_from(data)
    if magic != MATRIX_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
    if version != MATRIX_VERSION:
        raise ValueError(f"unsupported matrix format version {version}")
    expected = _HEADER.size + 4 * n_q * n_v
    if len(data) != expected:
        raise ValueError(f"matrix file is {len(data)} bytes, header implies {expected}")
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(n_q, n_v).astype(np.float64)


def write_matrix(matrix: SimilarityMatrix | np.ndarray, path: str | Path) -> None:
    values = matrix.values if isinstance(matrix, SimilarityMatrix) else matrix
    atomic_write_bytes(path, encode_matrix(values))


def read_matrix(
    path: str | Path, fps: float, video_id: str = "video", duration: float | None = None
) -> SimilarityMatrix:
    values = decode_matrix(Path(path).read_bytes())
    n_v = values.shape[1]
    if duration is not None:
        duration = max(duration, (n_v - 1) / fps)
    timeline = FrameTimeline.synthetic(video_id, n_v, fps, duration)
    # float32 storage can push a clipped 1.0 a hair outside the cosine range
    return SimilarityMatrix(np.clip(values, -1.0, 1.0), (), timeline)
