"""Per-frame captioning through a multimodal chat model."""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from PIL import Image, UnidentifiedImageError

from groundline._io import JsonlError, atomic_write_text, dumps_jsonl, iter_jsonl
from groundline.core import FrameTimeline, ValidationError
from groundline.gateway import ChatRequest, Gateway, Message

logger = logging.getLogger(__name__)

CAPTION_PROMPT = "[image caption] Please describe the content of this image in detail."
CAPTION_TEMPERATURE = 0.1
DEFAULT_CAPTION_MODEL = "minigpt-v2"
EMPTY_CAPTION = "(no caption)"
FRAME_PATTERN = "{index:06d}.jpg"

DATASET_FPS = {"qvhighlights": 0.5, "charades": 0.5, "activitynet": 1 / 3}

_MIME = {"JPEG": "image/jpeg", "PNG": "image/png", "WEBP": "image/webp", "BMP": "image/bmp", "GIF": "image/gif"}


class MissingFrame(FileNotFoundError):
    """A frame reference is absent or does not decode as an image."""


@dataclass(frozen=True)
class SamplingPolicy:
    fps: float

    def __post_init__(self) -> None:
        if not (self.fps > 0 and math.isfinite(self.fps)):
            raise ValidationError(f"sampling fps must be positive, got {self.fps}")

    @classmethod
    def for_dataset(cls, kind: str) -> SamplingPolicy:
        return cls(DATASET_FPS[kind])

    def expected_frames(self, duration: float) -> int:
        return expected_frame_count(duration, self.fps)


def expected_frame_count(duration: float, fps: float) -> int:
    # round first so that e.g. 300 s * 0.5 fps does not become 150.00000000000003
    return max(1, math.ceil(round(duration * fps, 9)))


@dataclass(frozen=True)
class CaptionTrack:
    video_id: str
    timeline: FrameTimeline
    captions: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "captions", tuple(self.captions))
        if len(self.captions) != self.timeline.n_frames:
            raise ValidationError(
                f"{self.video_id}: {len(self.captions)} captions for {self.timeline.n_frames} frames"
            )

    def records(self) -> list[dict]:
        return [
            {"video_id": self.video_id, "frame_index": j, "t": self.timeline.timestamp(j), "caption": c}
            for j, c in enumerate(self.captions)
        ]


def frame_extraction_command(video_path: str | Path, frames_dir: str | Path, video_id: str, fps: float) -> list[str]:
    """ffmpeg command line writing ``{frames_dir}/{video_id}/{index:06}.jpg`` at ``fps``."""
    out = Path(frames_dir) / video_id / "%06d.jpg"
    return [
        "ffmpeg", "-hide_banner", "-loglevel", "error", "-i", str(video_path),
        "-vf", f"fps={fps!r}", "-q:v", "2", "-start_number", "0", str(out),
    ]


def timeline_from_frames_dir(
    frames_dir: str | Path, video_id: str, fps: float, duration: float | None = None
) -> FrameTimeline:
    video_dir = Path(frames_dir) / video_id
    if not video_dir.is_dir():
        raise MissingFrame(f"no frames for video {video_id!r}: expected directory {video_dir}")
    refs = sorted(p for p in video_dir.iterdir() if p.suffix.lower() in (".jpg", ".jpeg", ".png"))
    if not refs:
        raise MissingFrame(f"frame directory {video_dir} contains no images")
    n = len(refs)
    if duration is None:
        duration = n / fps
    elif abs(n - expected_frame_count(duration, fps)) > 1:
        logger.warning("%s: %d frames extracted, expected about %d", video_id, n, expected_frame_count(duration, fps))
    # container rounding can leave one extra frame past the annotated duration
    duration = max(duration, (n - 1) / fps)
    return FrameTimeline(video_id, fps, duration, tuple(str(p) for p in refs))


def build_caption_prompt(
    frame_ref: str | Path,
    model_id: str = DEFAULT_CAPTION_MODEL,
    temperature: float = CAPTION_TEMPERATURE,
) -> ChatRequest:
    path = Path(frame_ref)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MissingFrame(f"cannot read frame {path}: {exc}") from exc
    try:
        with Image.open(io.BytesIO(data)) as img:
            fmt, size = img.format, img.size
            img.verify()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise MissingFrame(f"frame {path} does not decode as an image: {exc}") from exc
    return ChatRequest(
        model_id=model_id,
        messages=(Message("user", CAPTION_PROMPT, image=data, image_mime=_MIME.get(fmt, "image/jpeg")),),
        temperature=temperature,
        meta={"frame_ref": str(path), "resolution": list(size)},
    )


def caption_video(
    timeline: FrameTimeline,
    gateway: Gateway,
    model_id: str = DEFAULT_CAPTION_MODEL,
    temperature: float = CAPTION_TEMPERATURE,
) -> CaptionTrack:
    """One caption per frame in frame order; blank captions become ``EMPTY_CAPTION``."""
    requests = [build_caption_prompt(ref, model_id, temperature) for ref in timeline.frame_refs]
    raw = gateway.map(lambda r: gateway.chat(r, stage="caption"), requests)
    captions = []
    for j, text in enumerate(raw):
        text = text.strip()
        if not text:
            logger.warning("%s frame %d: empty caption replaced by sentinel", timeline.video_id, j)
            text = EMPTY_CAPTION
        captions.append(text)
    return CaptionTrack(timeline.video_id, timeline, tuple(captions))


def write_caption_jsonl(track: CaptionTrack, path: str | Path) -> None:
    atomic_write_text(path, dumps_jsonl(track.records()))


def read_caption_jsonl(
    path: str | Path, fps: float, duration: float | None = None, frame_refs: Sequence[str] | None = None
) -> CaptionTrack:
    """Load a caption track; frames must be listed with contiguous indices from 0."""
    rows: dict[int, str] = {}
    video_id = None
    for lineno, rec in iter_jsonl(path):
        try:
            vid, j, caption = str(rec["video_id"]), int(rec["frame_index"]), rec["caption"]
        except (KeyError, TypeError, ValueError) as exc:
            raise JsonlError(path, lineno, f"bad caption record: {exc}") from exc
        if not isinstance(caption, str):
            raise JsonlError(path, lineno, "caption must be a string")
        if video_id is None:
            video_id = vid
        elif vid != video_id:
            raise JsonlError(path, lineno, f"mixed video ids {video_id!r} and {vid!r}")
        if j in rows:
            raise JsonlError(path, lineno, f"duplicate frame index {j}")
        rows[j] = caption.strip() or EMPTY_CAPTION
    if not rows:
        raise ValueError(f"{path}: no caption records")
    if sorted(rows) != list(range(len(rows))):
        raise ValueError(f"{path}: frame indices are not contiguous from 0")
    n = len(rows)
    if frame_refs is None:
        frame_refs = [f"{video_id}/{j:06d}.jpg" for j in range(n)]
    dur = max(duration if duration is not None else n / fps, (n - 1) / fps)
    timeline = FrameTimeline(video_id, fps, dur, tuple(frame_refs))
    return CaptionTrack(video_id, timeline, tuple(rows[j] for j in range(n)))
