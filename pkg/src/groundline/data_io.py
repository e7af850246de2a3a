"""Loaders for QVHighlights, Charades-STA and ActivityNet-Captions annotations.

All datasets are converted to seconds on load. Unknown JSON fields are kept
in ``DatasetRecord.extra`` so they can be written back unchanged.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Hashable, Iterable, Mapping

from groundline._io import JsonlError, SchemaError, atomic_write_text, dumps_jsonl, iter_jsonl
from groundline.core import Query, TimeSegment, ValidationError
from groundline.evaluate import MomentGroundTruth, SaliencyGroundTruth

logger = logging.getLogger(__name__)

QVH_CLIP_SECONDS = 2.0
DATASET_KINDS = ("qvhighlights", "charades", "activitynet")

_QVH_FIELDS = ("qid", "query", "vid", "duration", "relevant_windows", "relevant_clip_ids", "saliency_scores")


@dataclass(frozen=True)
class DatasetRecord:
    qid: Hashable
    query: Query
    video_id: str
    duration: float
    gt: MomentGroundTruth | None
    saliency: SaliencyGroundTruth | None = None
    relevant_clip_ids: tuple[int, ...] | None = None
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.duration > 0:
            raise ValidationError(f"query {self.qid}: duration must be positive")


def clip_to_segment(clip_id: int, clip_seconds: float = QVH_CLIP_SECONDS) -> TimeSegment:
    return TimeSegment(clip_id * clip_seconds, (clip_id + 1) * clip_seconds)


def _clip_segments(
    raw: Iterable, duration: float, where: str, allow_zero_length: bool
) -> list[TimeSegment]:
    segments = []
    for pair in raw:
        try:
            start, end = (float(x) for x in pair)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: window {pair!r} is not a [start, end] pair") from exc
        if not (math.isfinite(start) and math.isfinite(end)):
            raise SchemaError(f"{where}: non-finite window {pair!r}")
        if end < start:
            raise SchemaError(f"{where}: window end {end} precedes start {start}")
        cs, ce = min(max(start, 0.0), duration), min(max(end, 0.0), duration)
        if (cs, ce) != (start, end):
            logger.warning("%s: window [%g, %g] clipped to [%g, %g]", where, start, end, cs, ce)
        if ce <= cs and not allow_zero_length:
            raise SchemaError(f"{where}: zero-length ground-truth window [{cs}, {ce}]")
        segments.append(TimeSegment(cs, ce))
    return segments


def _parse_qvh(rec: Any, where: str, allow_zero_length: bool) -> DatasetRecord:
    if not isinstance(rec, dict):
        raise SchemaError(f"{where}: record is not a JSON object")
    for key in ("qid", "query", "vid", "duration"):
        if key not in rec:
            raise SchemaError(f"{where}: missing field {key!r}")
    try:
        duration = float(rec["duration"])
        query = Query(rec["qid"], rec["query"])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    if not duration > 0:
        raise SchemaError(f"{where}: duration must be positive")
    gt = None
    if "relevant_windows" in rec:
        segs = _clip_segments(rec["relevant_windows"], duration, where, allow_zero_length)
        if not segs:
            raise SchemaError(f"{where}: empty relevant_windows")
        gt = MomentGroundTruth(rec["qid"], tuple(segs), duration)
    saliency = clip_ids = None
    if "saliency_scores" in rec or "relevant_clip_ids" in rec:
        try:
            clip_ids = tuple(int(c) for c in rec["relevant_clip_ids"])
            scores = [tuple(int(s) for s in row) for row in rec["saliency_scores"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: bad saliency annotation: {exc}") from exc
        if len(scores) != len(clip_ids):
            raise SchemaError(f"{where}: {len(clip_ids)} clip ids but {len(scores)} saliency rows")
        n_clips = max(1, math.ceil(round(duration / QVH_CLIP_SECONDS, 9)))
        n_annotators = len(scores[0]) if scores else 3
        clips = [(0,) * n_annotators for _ in range(n_clips)]
        for c, row in zip(clip_ids, scores):
            if not 0 <= c < n_clips:
                raise SchemaError(f"{where}: clip id {c} outside [0, {n_clips})")
            clips[c] = row
        try:
            saliency = SaliencyGroundTruth(rec["qid"], tuple(clips))
        except ValidationError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
    extra = {k: v for k, v in rec.items() if k not in _QVH_FIELDS}
    return DatasetRecord(rec["qid"], query, str(rec["vid"]), duration, gt, saliency, clip_ids, extra)


def load_qvhighlights(path: str | Path, allow_zero_length: bool = False) -> list[DatasetRecord]:
    """Read a QVHighlights annotation JSONL (train/val/test split file)."""
    out = []
    try:
        for lineno, rec in iter_jsonl(path):
            try:
                out.append(_parse_qvh(rec, f"{path}:{lineno}", allow_zero_length))
            except ValidationError as exc:
                raise JsonlError(path, lineno, str(exc)) from exc
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    return out


def qvhighlights_record(rec: DatasetRecord) -> dict:
    """Inverse of the QVHighlights parser for the consumed fields, plus extras."""
    out: dict[str, Any] = {"qid": rec.qid, "query": rec.query.text, "duration": rec.duration, "vid": rec.video_id}
    if rec.gt is not None:
        out["relevant_windows"] = [s.as_list() for s in rec.gt.segments]
    if rec.saliency is not None and rec.relevant_clip_ids is not None:
        out["relevant_clip_ids"] = list(rec.relevant_clip_ids)
        out["saliency_scores"] = [list(rec.saliency.clip_annotations[c]) for c in rec.relevant_clip_ids]
    out.update(rec.extra)
    return out


def dump_qvhighlights(records: Iterable[DatasetRecord], path: str | Path) -> None:
    atomic_write_text(path, dumps_jsonl(qvhighlights_record(r) for r in records))


def load_duration_table(path: str | Path) -> dict[str, float]:
    """Video durations from a JSON object, or a CSV / whitespace file of ``video_id duration``."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return {str(k): float(v) for k, v in json.loads(text).items()}
    table = {}
    rows = csv.reader(text.splitlines()) if "," in text else (line.split() for line in text.splitlines())
    for row in rows:
        if not row or row[0].startswith("#"):
            continue
        try:
            table[row[0].strip()] = float(row[1])
        except (IndexError, ValueError):
            if not table:
                continue  # header line
            raise SchemaError(f"{path}: bad duration row {row!r}")
    return table


def load_charades_sta(
    path: str | Path,
    durations: str | Path | Mapping[str, float] | None = None,
    allow_zero_length: bool = False,
) -> list[DatasetRecord]:
    """Read ``VIDEOID START END##query`` lines; qid is the 0-based line index.

    The annotation format carries no durations: they come from ``durations``
    (a mapping or a duration-table path). Without one, the segment end stands
    in for the duration and a warning is logged.
    """
    table = load_duration_table(durations) if isinstance(durations, (str, Path)) else durations
    if table is None:
        logger.warning("no Charades-STA duration table given; using segment ends as durations")
    out = []
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    qid = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        where = f"{path}:{lineno}"
        if "##" not in line:
            raise SchemaError(f"{where}: missing '##' separator")
        head, text = line.split("##", 1)
        parts = head.split()
        if len(parts) != 3:
            raise SchemaError(f"{where}: expected 'VIDEOID START END' before '##'")
        vid = parts[0]
        try:
            start, end = float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        if end < start:
            raise SchemaError(f"{where}: end {end} precedes start {start}")
        if table is None:
            duration = end
        elif vid in table:
            duration = float(table[vid])
        else:
            raise SchemaError(f"{where}: video {vid!r} missing from duration table")
        try:
            segs = _clip_segments([(start, end)], duration, where, allow_zero_length)
            rec = DatasetRecord(qid, Query(qid, text.strip()), vid, duration,
                                MomentGroundTruth(qid, tuple(segs), duration))
        except ValidationError as exc:
            raise SchemaError(f"{where}: {exc}") from exc
        out.append(rec)
        qid += 1
    return out


def load_activitynet_captions(path: str | Path, allow_zero_length: bool = False) -> list[DatasetRecord]:
    """One record per (video, sentence) pair; qid is ``"{video_id}#{index}"``."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except ValueError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected an object keyed by video id")
    out = []
    for vid, entry in data.items():
        where = f"{path}[{vid}]"
        try:
            duration = float(entry["duration"])
            stamps, sentences = entry["timestamps"], entry["sentences"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{where}: {exc!r}") from exc
        if len(stamps) != len(sentences):
            raise SchemaError(f"{where}: {len(stamps)} timestamps but {len(sentences)} sentences")
        if not duration > 0:
            raise SchemaError(f"{where}: duration must be positive")
        extra = {k: v for k, v in entry.items() if k not in ("duration", "timestamps", "sentences")}
        for i, (stamp, sentence) in enumerate(zip(stamps, sentences)):
            qid = f"{vid}#{i}"
            try:
                segs = _clip_segments([stamp], duration, f"{where}[{i}]", allow_zero_length)
                out.append(DatasetRecord(qid, Query(qid, sentence.strip()), str(vid), duration,
                                         MomentGroundTruth(qid, tuple(segs), duration), extra=extra))
            except (ValidationError, AttributeError) as exc:
                raise SchemaError(f"{where}[{i}]: {exc}") from exc
    return out


def load_dataset(kind: str, path: str | Path, durations=None, allow_zero_length: bool = False) -> list[DatasetRecord]:
    if kind == "qvhighlights":
        return load_qvhighlights(path, allow_zero_length)
    if kind == "charades":
        return load_charades_sta(path, durations, allow_zero_length)
    if kind == "activitynet":
        return load_activitynet_captions(path, allow_zero_length)
    raise ValueError(f"unknown dataset kind {kind!r}; expected one of {DATASET_KINDS}")


def ground_truth_maps(records: Iterable[DatasetRecord]):
    """``(moment_gt, saliency_gt)`` dicts keyed by qid, skipping records without annotations."""
    moments, saliency = {}, {}
    for r in records:
        if r.gt is not None:
            moments[r.qid] = r.gt
        if r.saliency is not None:
            saliency[r.qid] = r.saliency
    return moments, saliency
