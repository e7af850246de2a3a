"""Domain types shared by every stage, plus temporal interval arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ValidationError(ValueError):
    """A domain object was constructed with values violating its invariants."""


@dataclass(frozen=True, slots=True)
class TimeSegment:
    """A closed interval ``[start, end]`` in seconds."""

    start: float
    end: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValidationError(f"segment bounds must be finite: {self}")
        if self.start < 0:
            raise ValidationError(f"segment start must be >= 0: {self}")
        if self.start > self.end:
            raise ValidationError(f"segment start > end: {self}")

    @property
    def length(self) -> float:
        return self.end - self.start

    def shifted(self, offset: float) -> TimeSegment:
        return TimeSegment(self.start + offset, self.end + offset)

    def clipped(self, duration: float) -> TimeSegment:
        return TimeSegment(min(max(self.start, 0.0), duration), min(max(self.end, 0.0), duration))

    def as_list(self) -> list[float]:
        return [self.start, self.end]


def iou(a: TimeSegment, b: TimeSegment) -> float:
    """Temporal intersection over union of two segments.

    Two identical zero-length segments have IoU 1; a zero-length segment
    against anything else has IoU 0.
    """
    inter = min(a.end, b.end) - max(a.start, b.start)
    union = max(a.end, b.end) - min(a.start, b.start)
    if union <= 0:
        return 1.0 if (a.start == b.start and a.end == b.end) else 0.0
    if inter <= 0:
        return 0.0
    # union of overlapping intervals equals their hull
    return inter / union


def pairwise_iou(starts_a, ends_a, starts_b, ends_b) -> np.ndarray:
    """Vectorised IoU matrix between two sets of intervals given as arrays."""
    sa = np.asarray(starts_a, dtype=float)[:, None]
    ea = np.asarray(ends_a, dtype=float)[:, None]
    sb = np.asarray(starts_b, dtype=float)[None, :]
    eb = np.asarray(ends_b, dtype=float)[None, :]
    inter = np.minimum(ea, eb) - np.maximum(sa, sb)
    union = np.maximum(ea, eb) - np.minimum(sa, sb)
    out = np.zeros(np.broadcast_shapes(sa.shape, sb.shape))
    pos = (inter > 0) & (union > 0)
    np.divide(inter, union, out=out, where=pos)
    same_point = (union <= 0) & (sa == sb) & (ea == eb)
    out[same_point] = 1.0
    return out


def frame_index_to_segment(j: int, fps: float) -> TimeSegment:
    """The sampling period covered by frame ``j``: ``[j/fps, (j+1)/fps]``."""
    if j < 0:
        raise ValidationError(f"frame index must be >= 0, got {j}")
    if not fps > 0:
        raise ValidationError(f"fps must be positive, got {fps}")
    return TimeSegment(j / fps, (j + 1) / fps)


@dataclass(frozen=True, slots=True)
class FrameTimeline:
    video_id: str
    fps: float
    duration: float
    frame_refs: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "frame_refs", tuple(str(r) for r in self.frame_refs))
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise ValidationError(f"fps must be positive and finite, got {self.fps}")
        if not len(self.frame_refs) >= 1:
            raise ValidationError(f"{self.video_id}: timeline needs at least one frame")
        if not self.duration > 0:
            raise ValidationError(f"{self.video_id}: duration must be positive")
        # tolerance covers float rounding of n/fps
        if self.n_frames / self.fps > self.duration + 1.0 / self.fps + 1e-9:
            raise ValidationError(
                f"{self.video_id}: {self.n_frames} frames at {self.fps} fps overrun "
                f"duration {self.duration}s by more than one frame period"
            )

    @property
    def n_frames(self) -> int:
        return len(self.frame_refs)

    def segment(self, j: int) -> TimeSegment:
        return frame_index_to_segment(j, self.fps)

    def timestamp(self, j: int) -> float:
        return j / self.fps

    @classmethod
    def synthetic(cls, video_id: str, n_frames: int, fps: float, duration: float | None = None) -> FrameTimeline:
        """Timeline with placeholder frame references, for imported matrices."""
        refs = tuple(f"{video_id}/{j:06d}.jpg" for j in range(n_frames))
        return cls(video_id, fps, duration if duration is not None else n_frames / fps, refs)


@dataclass(frozen=True, slots=True)
class Query:
    query_id: int | str
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValidationError(f"query {self.query_id!r} has empty text")

    @property
    def n_words(self) -> int:
        return len(self.text.split())


@dataclass(frozen=True)
class SimilarityMatrix:
    """Query-by-frame cosine similarity scores for one (query, video) pair.

    ``values`` has one row per rephrasing and one column per frame of
    ``timeline``; it is stored read-only.
    """

    values: np.ndarray
    query_ids: tuple[str, ...]
    timeline: FrameTimeline
    _checked: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.float64, copy=True)
        if vals.ndim != 2:
            raise ValidationError(f"similarity matrix must be 2-D, got shape {vals.shape}")
        if vals.shape[0] < 1:
            raise ValidationError("similarity matrix needs at least one row")
        if vals.shape[1] != self.timeline.n_frames:
            raise ValidationError(
                f"matrix has {vals.shape[1]} columns but timeline has {self.timeline.n_frames} frames"
            )
        if not np.all(np.isfinite(vals)):
            raise ValidationError("similarity matrix contains non-finite values")
        if self._checked and (vals.min() < -1.0 - 1e-6 or vals.max() > 1.0 + 1e-6):
            raise ValidationError("similarity values must lie in [-1, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        ids = tuple(str(q) for q in self.query_ids) if self.query_ids else tuple(
            str(i) for i in range(vals.shape[0])
        )
        if len(ids) != vals.shape[0]:
            raise ValidationError("query_ids length must equal the number of rows")
        object.__setattr__(self, "query_ids", ids)

    @property
    def n_q(self) -> int:
        return self.values.shape[0]

    @property
    def n_v(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[Sequence[float]],
        fps: float = 0.5,
        video_id: str = "video",
        check_range: bool = True,
    ) -> SimilarityMatrix:
        """Convenience constructor; ``check_range=False`` admits arbitrary real scores."""
        arr = np.asarray(rows, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        timeline = FrameTimeline.synthetic(video_id, arr.shape[1], fps)
        return cls(arr, tuple(str(i) for i in range(arr.shape[0])), timeline, check_range)
