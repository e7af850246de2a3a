"""Moment retrieval and highlight detection metrics.

Moment retrieval: R1@m, detection-style mAP over an IoU grid, mIoU.
Highlight detection: mAP and HIT@1 over 2-second clips against "very good"
annotator labels.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from groundline._io import JsonlError, SchemaError, iter_jsonl
from groundline.core import TimeSegment, ValidationError, iou, pairwise_iou

logger = logging.getLogger(__name__)

DEFAULT_R1_THRESHOLDS = (0.5, 0.7)
DEFAULT_GRID = "0.5:0.05:0.95"

Window = tuple[float, float, float]


class MissingPrediction(UserWarning):
    """A ground-truth query has no predicted window."""


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class MomentGroundTruth:
    qid: Hashable
    segments: tuple[TimeSegment, ...]
    duration: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ValidationError(f"query {self.qid}: ground truth needs at least one segment")
        for seg in self.segments:
            if seg.end > self.duration + 1e-6:
                raise ValidationError(f"query {self.qid}: segment {seg} exceeds duration {self.duration}")


@dataclass(frozen=True)
class SaliencyGroundTruth:
    """Per-clip annotator scores (0-4) for one query."""

    qid: Hashable
    clip_annotations: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        anns = tuple(tuple(int(x) for x in clip) for clip in self.clip_annotations)
        for clip in anns:
            if any(not 0 <= x <= 4 for x in clip):
                raise ValidationError(f"query {self.qid}: saliency scores must lie in [0, 4]")
        object.__setattr__(self, "clip_annotations", anns)

    @property
    def n_clips(self) -> int:
        return len(self.clip_annotations)


def very_good(scores: Sequence[int]) -> bool:
    """Default positive-clip rule: some annotator rated the clip 4 (very good)."""
    return any(s >= 4 for s in scores)


def parse_grid(spec: str | Sequence[float]) -> list[float]:
    """``"0.5:0.05:0.95"`` (inclusive) or a comma list, or an explicit sequence."""
    if not isinstance(spec, str):
        return [float(x) for x in spec]
    if ":" in spec:
        start, step, stop = (float(x) for x in spec.split(":"))
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    return [float(x) for x in spec.split(",") if x.strip()]


def _key(m: float) -> str:
    return f"{m:g}"


def _ranked(windows: Sequence[Window]) -> list[Window]:
    # stable: equal scores keep submission order
    return sorted(windows, key=lambda w: -w[2])


def _top1(windows: Sequence[Window]) -> Window | None:
    return _ranked(windows)[0] if windows else None


def _best_iou(window: Window, gt: MomentGroundTruth) -> float:
    seg = TimeSegment(window[0], window[1])
    return max(iou(seg, g) for g in gt.segments)


def _passes(value: float, m: float, strict: bool) -> bool:
    return value > m if strict else value >= m


def _iter_queries(preds: Mapping[Hashable, Sequence[Window]], gts: Mapping[Hashable, MomentGroundTruth]):
    extra = set(preds) - set(gts)
    if extra:
        logger.warning("%d predicted qids have no ground truth and are ignored", len(extra))
    missing = [qid for qid in gts if not preds.get(qid)]
    if missing:
        warnings.warn(
            f"{len(missing)} queries have no prediction and count as misses (first: {missing[0]!r})",
            MissingPrediction,
            stacklevel=3,
        )
    for qid, gt in gts.items():
        yield qid, list(preds.get(qid) or ()), gt


def recall1(
    preds: Mapping[Hashable, Sequence[Window]],
    gts: Mapping[Hashable, MomentGroundTruth],
    m: float,
    strict: bool = False,
) -> float:
    """Percentage of queries whose top-scored window reaches IoU ``m`` with some GT segment."""
    if not gts:
        return 0.0
    correct = 0
    for _, windows, gt in _iter_queries(preds, gts):
        top = _top1(windows)
        if top is not None and _passes(_best_iou(top, gt), m, strict):
            correct += 1
    return 100.0 * correct / len(gts)


def mean_iou(preds: Mapping[Hashable, Sequence[Window]], gts: Mapping[Hashable, MomentGroundTruth]) -> float:
    """Mean over queries of the top-1 window's IoU with its best GT segment, in [0, 1]."""
    if not gts:
        return 0.0
    total = 0.0
    for _, windows, gt in _iter_queries(preds, gts):
        top = _top1(windows)
        if top is not None:
            total += _best_iou(top, gt)
    return total / len(gts)


def average_precision(
    windows: Sequence[Window],
    gt_segments: Sequence[TimeSegment],
    m: float,
    strict: bool = False,
    interpolated: bool = False,
) -> float:
    """AP of a ranked window list against GT segments at IoU threshold ``m``.

    Each prediction, best score first, claims the unclaimed GT segment with
    the highest IoU that passes the threshold. AP is the precision at every
    true positive, summed and divided by the number of GT segments. With
    ``interpolated`` the precision curve is first replaced by its running
    maximum from the right.
    """
    n_gt = len(gt_segments)
    if n_gt == 0:
        raise ValueError("average precision needs at least one GT segment")
    ranked = _ranked(windows)
    if not ranked:
        return 0.0
    ious = pairwise_iou(
        [w[0] for w in ranked], [w[1] for w in ranked],
        [g.start for g in gt_segments], [g.end for g in gt_segments],
    )
    claimed = np.zeros(n_gt, dtype=bool)
    tp = np.zeros(len(ranked), dtype=bool)
    for i in range(len(ranked)):
        ok = (ious[i] > m) if strict else (ious[i] >= m)
        candidates = np.flatnonzero(ok & ~claimed)
        if candidates.size:
            # argmax picks the lowest index among equal IoUs
            j = candidates[np.argmax(ious[i, candidates])]
            claimed[j] = True
            tp[i] = True
    if not tp.any():
        return 0.0
    precision = np.cumsum(tp) / np.arange(1, len(ranked) + 1)
    if interpolated:
        precision = np.maximum.accumulate(precision[::-1])[::-1]
    return float(precision[tp].sum() / n_gt)


def detection_map(
    preds: Mapping[Hashable, Sequence[Window]],
    gts: Mapping[Hashable, MomentGroundTruth],
    grid: Sequence[float] | str = DEFAULT_GRID,
    strict: bool = False,
    interpolated: bool = False,
    max_windows: int | None = None,
) -> tuple[dict[str, float], float]:
    """Per-threshold mAP (macro-averaged over queries) and its mean over the grid."""
    thresholds = parse_grid(grid)
    per_query = np.zeros((len(gts), len(thresholds)))
    for qi, (_, windows, gt) in enumerate(_iter_queries(preds, gts)):
        if max_windows is not None:
            windows = _ranked(windows)[:max_windows]
        for ti, m in enumerate(thresholds):
            per_query[qi, ti] = average_precision(windows, gt.segments, m, strict, interpolated)
    means = per_query.mean(axis=0) if len(gts) else np.zeros(len(thresholds))
    map_at = {_key(m): float(v) for m, v in zip(thresholds, means)}
    return map_at, float(np.mean(means)) if len(thresholds) else 0.0


class HighlightScores(NamedTuple):
    hd_map: float
    hd_hit1: float
    n_excluded: int


def ranking_ap(scores: Sequence[float], positive: Sequence[bool]) -> float:
    """AP of ranking clips by score (stable on ties) against binary labels."""
    labels = np.asarray(positive, dtype=bool)
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    hits = labels[order]
    if not hits.any():
        raise ValueError("ranking AP needs at least one positive")
    precision = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float(precision[hits].mean())


def hd_metrics(
    pred_saliency: Mapping[Hashable, Sequence[float]],
    gt: Mapping[Hashable, SaliencyGroundTruth],
    vg_predicate: Callable[[Sequence[int]], bool] = very_good,
) -> HighlightScores:
    """Highlight-detection mAP (in [0, 1]) and HIT@1 (percentage).

    Queries without any positive clip are excluded from both and counted in
    ``n_excluded``; queries without a saliency prediction score zero.
    """
    aps, hits, excluded = [], [], 0
    for qid, sal in gt.items():
        labels = [bool(vg_predicate(c)) for c in sal.clip_annotations]
        if not any(labels):
            excluded += 1
            continue
        scores = pred_saliency.get(qid)
        if scores is None:
            logger.warning("query %s has no saliency prediction; counted as a miss", qid)
            aps.append(0.0)
            hits.append(0.0)
            continue
        if len(scores) != len(labels):
            raise LengthMismatch(f"query {qid}: {len(scores)} predicted clips, {len(labels)} annotated")
        aps.append(ranking_ap(scores, labels))
        hits.append(1.0 if labels[int(np.argmax(scores))] else 0.0)
    if excluded:
        logger.info("%d queries without positive clips excluded from highlight metrics", excluded)
    if not aps:
        return HighlightScores(0.0, 0.0, excluded)
    return HighlightScores(float(np.mean(aps)), 100.0 * float(np.mean(hits)), excluded)


@dataclass
class MetricReport:
    """Percentages for R1 and HIT@1; mAP, mIoU and HD mAP stored in [0, 1]."""

    r1_at: dict[str, float] = field(default_factory=dict)
    map_at: dict[str, float] = field(default_factory=dict)
    map_avg: float = 0.0
    miou: float = 0.0
    hd_map: float | None = None
    hd_hit1: float | None = None
    n_queries: int = 0

    def to_json(self) -> dict:
        return {
            "r1": dict(self.r1_at),
            "map": dict(self.map_at),
            "map_avg": self.map_avg,
            "miou": self.miou,
            "hd_map": self.hd_map,
            "hd_hit1": self.hd_hit1,
            "n_queries": self.n_queries,
        }

    def format_table(self) -> str:
        rows = [("queries", str(self.n_queries))]
        rows += [(f"R1@{k}", f"{v:.2f}") for k, v in self.r1_at.items()]
        for k in ("0.5", "0.75"):
            if k in self.map_at:
                rows.append((f"mAP@{k}", f"{100 * self.map_at[k]:.2f}"))
        rows.append(("mAP Avg.", f"{100 * self.map_avg:.2f}"))
        rows.append(("mIoU", f"{100 * self.miou:.2f}"))
        if self.hd_map is not None:
            rows.append(("HD mAP", f"{100 * self.hd_map:.2f}"))
            rows.append(("HD HIT@1", f"{self.hd_hit1:.2f}"))
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value:>8}" for name, value in rows)


def evaluate(
    preds: Mapping[Hashable, Sequence[Window]],
    gts: Mapping[Hashable, MomentGroundTruth],
    pred_saliency: Mapping[Hashable, Sequence[float]] | None = None,
    saliency_gt: Mapping[Hashable, SaliencyGroundTruth] | None = None,
    r1_thresholds: Iterable[float] = DEFAULT_R1_THRESHOLDS,
    grid: Sequence[float] | str = DEFAULT_GRID,
    strict: bool = False,
    vg_predicate: Callable[[Sequence[int]], bool] = very_good,
) -> MetricReport:
    report = MetricReport(n_queries=len(gts))
    report.r1_at = {_key(m): recall1(preds, gts, m, strict) for m in r1_thresholds}
    report.map_at, report.map_avg = detection_map(preds, gts, grid, strict)
    report.miou = mean_iou(preds, gts)
    if saliency_gt and pred_saliency is not None:
        hd = hd_metrics(pred_saliency, saliency_gt, vg_predicate)
        report.hd_map, report.hd_hit1 = hd.hd_map, hd.hd_hit1
    return report


def load_predictions(path) -> tuple[dict[Hashable, list[Window]], dict[Hashable, list[float]]]:
    """Read a prediction JSONL file into window and saliency maps keyed by qid."""
    windows: dict[Hashable, list[Window]] = {}
    sal: dict[Hashable, list[float]] = {}
    for lineno, rec in iter_jsonl(path):
        if not isinstance(rec, dict) or "qid" not in rec or "pred_relevant_windows" not in rec:
            raise JsonlError(path, lineno, "record needs 'qid' and 'pred_relevant_windows'")
        qid = rec["qid"]
        if qid in windows:
            raise JsonlError(path, lineno, f"duplicate qid {qid!r}")
        try:
            ws = [(float(w[0]), float(w[1]), float(w[2])) for w in rec["pred_relevant_windows"]]
        except (TypeError, ValueError, IndexError) as exc:
            raise JsonlError(path, lineno, f"bad window list: {exc}") from exc
        for w in ws:
            if not (all(math.isfinite(x) for x in w) and 0 <= w[0] <= w[1]):
                raise JsonlError(path, lineno, f"invalid window {list(w)}")
        windows[qid] = ws
        if "pred_saliency_scores" in rec:
            try:
                sal[qid] = [float(x) for x in rec["pred_saliency_scores"]]
            except (TypeError, ValueError) as exc:
                raise JsonlError(path, lineno, f"bad saliency scores: {exc}") from exc
    return windows, sal


__all__ = [
    "HighlightScores",
    "LengthMismatch",
    "MetricReport",
    "MissingPrediction",
    "MomentGroundTruth",
    "SaliencyGroundTruth",
    "SchemaError",
    "average_precision",
    "detection_map",
    "evaluate",
    "hd_metrics",
    "load_predictions",
    "mean_iou",
    "parse_grid",
    "ranking_ap",
    "recall1",
    "very_good",
]
