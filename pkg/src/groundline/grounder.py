"""Zero-shot proposal generation, scoring and suppression over a similarity matrix.

For each rephrasing row: a histogram-derived dynamic threshold, a left-to-right
scan that bridges short sub-threshold gaps, a length-aware fused score, then a
single NMS pass over the proposals pooled from every row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from groundline._io import atomic_write_text, dumps_jsonl
from groundline.core import SimilarityMatrix, TimeSegment, ValidationError, frame_index_to_segment, iou


@dataclass(frozen=True)
class GeneratorConfig:
    n_bins: int = 10
    top_k: int = 8
    gap_lambda: int = 6

    def __post_init__(self) -> None:
        if self.n_bins < 1 or self.top_k < 1 or self.gap_lambda < 0:
            raise ValidationError(f"invalid generator config {self}")


class SimilarityMode(str, Enum):
    """Which frames feed a proposal's similarity term."""

    RELEVANT_MEAN = "relevant_mean"
    EXTENT_MEAN = "extent_mean"
    MAX = "max"


@dataclass(frozen=True)
class ScorerConfig:
    alpha: float = 0.5
    similarity: SimilarityMode = SimilarityMode.RELEVANT_MEAN

    def __post_init__(self) -> None:
        object.__setattr__(self, "similarity", SimilarityMode(self.similarity))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class NmsConfig:
    iou_threshold: float = 0.75

    def __post_init__(self) -> None:
        if not 0.0 < self.iou_threshold <= 1.0:
            raise ValidationError(f"NMS IoU threshold must lie in (0, 1], got {self.iou_threshold}")


@dataclass(frozen=True, slots=True)
class Proposal:
    query_index: int
    start_frame: int
    end_frame: int
    fps: float

    def __post_init__(self) -> None:
        if not 0 <= self.start_frame <= self.end_frame:
            raise ValidationError(f"bad proposal frame range {self.start_frame}..{self.end_frame}")

    @property
    def segment(self) -> TimeSegment:
        return TimeSegment(self.start_frame / self.fps, (self.end_frame + 1) / self.fps)

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True, slots=True)
class ScoredProposal:
    proposal: Proposal
    s_l: float
    s_sim: float
    s_f: float

    @property
    def segment(self) -> TimeSegment:
        return self.proposal.segment


def _row_thresholds(values: np.ndarray, n_bins: int, top_k: int) -> np.ndarray:
    """Per-row lower edge of the histogram bin holding the k-th largest value."""
    n_v = values.shape[1]
    k = min(top_k, n_v)
    lo = values.min(axis=1)
    hi = values.max(axis=1)
    kth = -np.partition(-values, k - 1, axis=1)[:, k - 1]
    step = (hi - lo) / n_bins
    edges = np.arange(n_bins + 1)[None, :] * step[:, None] + lo[:, None]
    edges[:, -1] = hi
    # the last bin is closed on the right, so only interior edges decide membership
    bin_idx = np.sum(edges[:, 1:n_bins] <= kth[:, None], axis=1)
    theta = edges[np.arange(values.shape[0]), bin_idx]
    return np.where(hi == lo, lo, theta)


def dynamic_threshold(row: Sequence[float], cfg: GeneratorConfig = GeneratorConfig()) -> float:
    """Threshold for one similarity row.

    The row's range ``[min, max]`` is split into ``cfg.n_bins`` equal-width
    bins; the threshold is the lower edge of the bin containing the
    ``cfg.top_k``-th largest value (``k`` clamped to the row length). A
    constant row yields its constant.
    """
    arr = np.asarray(row, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("row must be a non-empty 1-D sequence")
    return float(_row_thresholds(arr[None, :], cfg.n_bins, cfg.top_k)[0])


def _runs(mask: np.ndarray, gap_lambda: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Group relevant cells of a boolean (rows x frames) mask into proposals.

    Returns ``(row, first, last, n_relevant)`` arrays, one entry per proposal,
    ordered by row and then by start frame.
    """
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty, empty, empty
    # a new proposal starts at a row change or after more than gap_lambda missing frames
    new = np.empty(rows.size, dtype=bool)
    new[0] = True
    new[1:] = (rows[1:] != rows[:-1]) | (np.diff(cols) - 1 > gap_lambda)
    heads = np.flatnonzero(new)
    tails = np.r_[heads[1:] - 1, rows.size - 1]
    return rows[heads], cols[heads], cols[tails], tails - heads + 1


def scan_proposals(row: Sequence[float], theta: float, gap_lambda: int, query_index: int = 0, fps: float = 1.0) -> list[Proposal]:
    """Split a row into proposals: frames with ``row[j] >= theta`` are relevant;
    gaps of at most ``gap_lambda`` non-relevant frames are bridged, longer gaps
    close the current proposal at its last relevant frame.
    """
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    arr = np.asarray(row, dtype=np.float64)
    _, first, last, _ = _runs((arr >= theta)[None, :], gap_lambda)
    return [Proposal(query_index, int(s), int(e), fps) for s, e in zip(first, last)]


def score_proposal(
    p: Proposal, row: Sequence[float], theta: float, cfg: ScorerConfig = ScorerConfig()
) -> ScoredProposal:
    arr = np.asarray(row, dtype=np.float64)
    relevant = arr >= theta
    inside = slice(p.start_frame, p.end_frame + 1)
    l_p = int(relevant[inside].sum())
    l_n = int(relevant.sum())
    if l_p == 0:
        raise ValueError("proposal contains no frame at or above theta")
    if cfg.similarity is SimilarityMode.RELEVANT_MEAN:
        s_sim = float(arr[inside][relevant[inside]].mean())
    elif cfg.similarity is SimilarityMode.EXTENT_MEAN:
        s_sim = float(arr[inside].mean())
    else:
        s_sim = float(arr[inside].max())
    s_l = l_p / l_n
    return ScoredProposal(p, s_l, s_sim, cfg.alpha * s_l + (1.0 - cfg.alpha) * s_sim)


def _nms_keep(
    starts: np.ndarray, ends: np.ndarray, scores: np.ndarray, qidx: np.ndarray, mu: float
) -> list[int]:
    # lexsort: last key is primary
    order = np.lexsort((qidx, ends - starts, starts, -scores))
    s, e = starts[order], ends[order]
    inter = np.minimum(e[:, None], e[None, :]) - np.maximum(s[:, None], s[None, :])
    union = np.maximum(e[:, None], e[None, :]) - np.minimum(s[:, None], s[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        overlap = np.where(union > 0, np.maximum(inter, 0.0) / union,
                           ((s[:, None] == s[None, :]) & (e[:, None] == e[None, :])).astype(float))
    over = (overlap > mu).tolist()
    n = order.size
    suppressed = [False] * n
    keep = []
    for i in range(n):
        if suppressed[i]:
            continue
        keep.append(int(order[i]))
        row = over[i]
        for j in range(i + 1, n):
            if row[j]:
                suppressed[j] = True
    return keep


def nms(proposals: Sequence[ScoredProposal], cfg: NmsConfig = NmsConfig()) -> list[ScoredProposal]:
    """Greedy suppression of proposals overlapping a better one by IoU > threshold.

    Ranking: higher ``s_f`` first, then earlier start, shorter segment, lower
    query index.
    """
    if not proposals:
        return []
    segs = [p.segment for p in proposals]
    keep = _nms_keep(
        np.array([s.start for s in segs]),
        np.array([s.end for s in segs]),
        np.array([p.s_f for p in proposals], dtype=np.float64),
        np.array([p.proposal.query_index for p in proposals]),
        cfg.iou_threshold,
    )
    return [proposals[i] for i in keep]


def _pooled_proposals(matrix: SimilarityMatrix, gen: GeneratorConfig, scorer: ScorerConfig):
    values = matrix.values
    thetas = _row_thresholds(values, gen.n_bins, gen.top_k)
    mask = values >= thetas[:, None]
    rows, first, last, l_p = _runs(mask, gen.gap_lambda)
    l_n = mask.sum(axis=1)[rows]
    if scorer.similarity is SimilarityMode.RELEVANT_MEAN:
        r_idx, c_idx = np.nonzero(mask)
        heads = np.r_[0, np.cumsum(l_p)[:-1]] if rows.size else np.zeros(0, dtype=np.intp)
        sums = np.add.reduceat(values[r_idx, c_idx], heads) if rows.size else np.zeros(0)
        s_sim = sums / np.maximum(l_p, 1)
    elif scorer.similarity is SimilarityMode.EXTENT_MEAN:
        csum = np.concatenate([np.zeros((values.shape[0], 1)), np.cumsum(values, axis=1)], axis=1)
        s_sim = (csum[rows, last + 1] - csum[rows, first]) / (last - first + 1)
    else:
        s_sim = np.array([values[r, s:e + 1].max() for r, s, e in zip(rows, first, last)])
    s_l = l_p / np.maximum(l_n, 1)
    alpha = scorer.alpha
    s_f = alpha * s_l + (1.0 - alpha) * s_sim
    return rows, first, last, s_l, s_sim, s_f


def _ground_arrays(matrix: SimilarityMatrix, gen: GeneratorConfig, scorer: ScorerConfig, nms_cfg: NmsConfig):
    fps = matrix.timeline.fps
    rows, first, last, s_l, s_sim, s_f = _pooled_proposals(matrix, gen, scorer)
    if rows.size == 0:
        return []
    keep = _nms_keep(first / fps, (last + 1) / fps, s_f, rows, nms_cfg.iou_threshold)
    return [(int(rows[i]), int(first[i]), int(last[i]), float(s_l[i]), float(s_sim[i]), float(s_f[i])) for i in keep]


def ground_proposals(
    matrix: SimilarityMatrix,
    gen: GeneratorConfig = GeneratorConfig(),
    scorer: ScorerConfig = ScorerConfig(),
    nms_cfg: NmsConfig = NmsConfig(),
) -> list[ScoredProposal]:
    """Scored proposals from every row, pooled and suppressed, best first."""
    fps = matrix.timeline.fps
    return [
        ScoredProposal(Proposal(r, s, e, fps), sl, ss, sf)
        for r, s, e, sl, ss, sf in _ground_arrays(matrix, gen, scorer, nms_cfg)
    ]


def ground(
    matrix: SimilarityMatrix,
    gen: GeneratorConfig = GeneratorConfig(),
    scorer: ScorerConfig = ScorerConfig(),
    nms_cfg: NmsConfig = NmsConfig(),
) -> list[tuple[TimeSegment, float]]:
    """Ranked ``(segment, fused score)`` pairs for one (query, video) matrix."""
    fps = matrix.timeline.fps
    return [
        (TimeSegment(s / fps, (e + 1) / fps), sf)
        for _, s, e, _, _, sf in _ground_arrays(matrix, gen, scorer, nms_cfg)
    ]


def saliency(matrix: SimilarityMatrix) -> list[float]:
    """Per-frame relevance: the mean similarity over all rephrasings."""
    return matrix.values.mean(axis=0).tolist()


def prediction_record(
    qid: int | str,
    ranked: Iterable[tuple[TimeSegment, float]],
    saliency_scores: Sequence[float] | None = None,
    duration: float | None = None,
) -> dict:
    """One line of the submission-format prediction file.

    Windows are clipped to ``duration`` because the last frame's sampling
    period may run past the end of the video.
    """
    windows = []
    for seg, score in ranked:
        if duration is not None:
            seg = seg.clipped(duration)
        windows.append([seg.start, seg.end, score])
    rec: dict = {"qid": qid, "pred_relevant_windows": windows}
    if saliency_scores is not None:
        rec["pred_saliency_scores"] = [float(x) for x in saliency_scores]
    return rec


def write_predictions(records: Iterable[dict], path) -> None:
    atomic_write_text(path, dumps_jsonl(records))


__all__ = [
    "GeneratorConfig",
    "NmsConfig",
    "Proposal",
    "ScoredProposal",
    "ScorerConfig",
    "SimilarityMode",
    "dynamic_threshold",
    "frame_index_to_segment",
    "ground",
    "ground_proposals",
    "iou",
    "nms",
    "prediction_record",
    "saliency",
    "scan_proposals",
    "score_proposal",
    "write_predictions",
]
