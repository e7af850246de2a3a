"""Stage runners shared by the command line and the demo scripts.

Artifacts live under ``config.work_dir``::

    debiased.jsonl              one debiased query set per qid
    captions/{video_id}.jsonl   one caption track per video
    matrices/{qid}.glsm         exported similarity matrices
    predictions.jsonl           grounding output
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from groundline._io import atomic_write_text
from groundline.captioner import (
    CaptionTrack,
    MissingFrame,
    caption_video,
    read_caption_jsonl,
    timeline_from_frames_dir,
    write_caption_jsonl,
)
from groundline.config import PipelineConfig
from groundline.core import SimilarityMatrix
from groundline.data_io import QVH_CLIP_SECONDS, DatasetRecord, ground_truth_maps, load_dataset
from groundline.evaluate import MetricReport, evaluate, load_predictions
from groundline.gateway import (
    Gateway,
    GatewayError,
    HttpChatProvider,
    HttpEmbedProvider,
    OfflineChatProvider,
    OfflineEmbedProvider,
    ResponseCache,
)
from groundline.gateway.http import API_KEY_ENV, CHAT_URL_ENV, EMBED_URL_ENV
from groundline.grounder import ground_proposals, prediction_record, saliency, write_predictions
from groundline.querygen import debias, read_debiased_jsonl, write_debiased_jsonl
from groundline.similarity import build_similarity, read_matrix, write_matrix

logger = logging.getLogger(__name__)


class StageMissing(FileNotFoundError):
    """An upstream artifact required by a stage has not been produced."""


@dataclass
class StageReport:
    written: list[Path] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def build_gateway(cfg: PipelineConfig, offline: bool = False) -> Gateway:
    cache = ResponseCache(cfg.cache_dir)
    p = cfg.providers
    if offline:
        chat = OfflineChatProvider.load(p.offline_config) if p.offline_config else OfflineChatProvider()
        embed = OfflineEmbedProvider(dim=p.offline_embed_dim, seed=cfg.seed)
        return Gateway(chat, embed, cache, max_workers=cfg.jobs)
    key = os.environ.get(API_KEY_ENV)
    chat_url = p.chat_base_url or os.environ.get(CHAT_URL_ENV)
    embed_url = p.embed_base_url or os.environ.get(EMBED_URL_ENV)
    chat = HttpChatProvider(chat_url, key, max_concurrency=cfg.jobs) if chat_url else None
    embed = HttpEmbedProvider(embed_url, key, max_concurrency=cfg.jobs) if embed_url else None
    return Gateway(chat, embed, cache, max_workers=cfg.jobs)


def work_path(cfg: PipelineConfig, *parts: str) -> Path:
    return Path(cfg.work_dir, *parts)


def load_records(cfg: PipelineConfig) -> list[DatasetRecord]:
    if not cfg.dataset.annotation_path:
        raise ValueError("dataset.annotation_path is not set")
    return load_dataset(cfg.dataset.kind, cfg.dataset.annotation_path, cfg.dataset.durations_path)


def unique_videos(records: Iterable[DatasetRecord]) -> dict[str, float]:
    videos: dict[str, float] = {}
    for r in records:
        videos.setdefault(r.video_id, r.duration)
    return videos


def run_debias(cfg: PipelineConfig, gateway: Gateway, out: Path | None = None) -> StageReport:
    """Debias every query; provider failures are collected per query, not raised."""
    records = load_records(cfg)
    p = cfg.providers

    def one(rec: DatasetRecord):
        try:
            return debias(rec.query, gateway, cfg.n_q, p.chat_model, p.debias_temperature)
        except GatewayError as exc:
            return exc

    results = gateway.map(one, records)
    report = StageReport()
    for rec, res in zip(records, results):
        if isinstance(res, Exception):
            logger.error("query %s: %s", rec.qid, res)
            report.failures[str(rec.qid)] = str(res)
    out = out or work_path(cfg, "debiased.jsonl")
    write_debiased_jsonl((r for r in results if not isinstance(r, Exception)), out)
    report.written.append(out)
    return report


def run_caption(cfg: PipelineConfig, gateway: Gateway, out_dir: Path | None = None) -> StageReport:
    frames_dir = cfg.dataset.frames_dir
    if not frames_dir or not Path(frames_dir).is_dir():
        raise StageMissing(
            f"frames directory {frames_dir!r} not found; extract frames to "
            f"{{frames_dir}}/{{video_id}}/{{index:06d}}.jpg first"
        )
    out_dir = out_dir or work_path(cfg, "captions")
    report = StageReport()
    p = cfg.providers
    for vid, duration in unique_videos(load_records(cfg)).items():
        try:
            timeline = timeline_from_frames_dir(frames_dir, vid, cfg.dataset.fps, duration)
            track = caption_video(timeline, gateway, p.caption_model, p.caption_temperature)
        except (MissingFrame, GatewayError) as exc:
            logger.error("video %s: %s", vid, exc)
            report.failures[vid] = str(exc)
            continue
        path = out_dir / f"{vid}.jsonl"
        write_caption_jsonl(track, path)
        report.written.append(path)
    return report


def _load_debiased(cfg: PipelineConfig) -> dict:
    path = work_path(cfg, "debiased.jsonl")
    if not path.exists():
        raise StageMissing(f"{path} not found; run the 'debias' stage first")
    return {str(s.original.query_id): s for s in read_debiased_jsonl(path)}


def _load_track(cfg: PipelineConfig, vid: str, duration: float) -> CaptionTrack:
    path = work_path(cfg, "captions", f"{vid}.jsonl")
    if not path.exists():
        raise StageMissing(f"{path} not found; run the 'caption' stage first")
    return read_caption_jsonl(path, cfg.dataset.fps, duration)


def iter_matrices(cfg: PipelineConfig, gateway: Gateway, records: list[DatasetRecord]):
    """``(record, SimilarityMatrix)`` for every record, from debiased queries and captions."""
    sets = _load_debiased(cfg)
    tracks: dict[str, CaptionTrack] = {}
    for rec in records:
        qset = sets.get(str(rec.qid))
        if qset is None:
            raise StageMissing(f"query {rec.qid!r} missing from debiased queries; rerun 'debias'")
        if rec.video_id not in tracks:
            tracks[rec.video_id] = _load_track(cfg, rec.video_id, rec.duration)
        yield rec, build_similarity(qset, tracks[rec.video_id], gateway, cfg.providers.embed_model)


def run_embed(cfg: PipelineConfig, gateway: Gateway) -> int:
    """Warm the embedding cache for every rephrasing and caption; returns the text count."""
    sets = _load_debiased(cfg)
    texts: dict[str, None] = {}
    for s in sets.values():
        texts.update(dict.fromkeys(s.rephrasings))
    for vid, duration in unique_videos(load_records(cfg)).items():
        texts.update(dict.fromkeys(_load_track(cfg, vid, duration).captions))
    gateway.embed(list(texts), cfg.providers.embed_model)
    return len(texts)


def run_export_matrix(cfg: PipelineConfig, gateway: Gateway, out_dir: Path | None = None) -> list[Path]:
    out_dir = out_dir or work_path(cfg, "matrices")
    written = []
    for rec, matrix in iter_matrices(cfg, gateway, load_records(cfg)):
        path = out_dir / f"{rec.qid}.glsm"
        write_matrix(matrix, path)
        written.append(path)
    return written


def _imported_matrices(cfg: PipelineConfig, matrix_dir: Path, records: list[DatasetRecord]):
    for rec in records:
        path = matrix_dir / f"{rec.qid}.glsm"
        if not path.exists():
            raise StageMissing(f"{path} not found; run 'export-matrix' or fix --matrix")
        yield rec, read_matrix(path, cfg.dataset.fps, rec.video_id, rec.duration)


def _fit_saliency(scores: list[float], rec: DatasetRecord, cfg: PipelineConfig) -> list[float]:
    """Align frame saliency with 2-second annotation clips when frames are clips."""
    if cfg.dataset.kind != "qvhighlights" or not math.isclose(cfg.dataset.fps, 1 / QVH_CLIP_SECONDS):
        return scores
    n_clips = rec.saliency.n_clips if rec.saliency is not None else max(
        1, math.ceil(round(rec.duration / QVH_CLIP_SECONDS, 9))
    )
    if len(scores) > n_clips:
        return scores[:n_clips]
    if len(scores) < n_clips:
        logger.warning("query %s: padding saliency from %d to %d clips", rec.qid, len(scores), n_clips)
        return scores + [min(scores)] * (n_clips - len(scores))
    return scores


def predict(cfg: PipelineConfig, matrices: Iterable[tuple[DatasetRecord, SimilarityMatrix]]) -> list[dict]:
    out = []
    for rec, matrix in matrices:
        kept = ground_proposals(matrix, cfg.generator, cfg.scorer, cfg.nms)
        ranked = [(p.segment, p.s_f) for p in kept]
        out.append(prediction_record(rec.qid, ranked, _fit_saliency(saliency(matrix), rec, cfg), rec.duration))
    return out


def run_ground(
    cfg: PipelineConfig,
    gateway: Gateway | None,
    matrix_dir: Path | None = None,
    out: Path | None = None,
) -> Path:
    records = load_records(cfg)
    if matrix_dir is not None:
        matrices = list(_imported_matrices(cfg, Path(matrix_dir), records))
    else:
        if gateway is None:
            raise ValueError("grounding without --matrix needs an embedding gateway")
        matrices = list(iter_matrices(cfg, gateway, records))
    out = out or work_path(cfg, "predictions.jsonl")
    write_predictions(predict(cfg, matrices), out)
    return out


def run_eval(
    pred_path: Path,
    records: list[DatasetRecord],
    grid: str = "0.5:0.05:0.95",
    r1_thresholds: Iterable[float] = (0.5, 0.7),
    strict: bool = False,
    out: Path | None = None,
) -> MetricReport:
    windows, sal = load_predictions(pred_path)
    moments, saliency_gt = ground_truth_maps(records)
    report = evaluate(windows, moments, sal, saliency_gt, r1_thresholds, grid, strict)
    if out is not None:
        atomic_write_text(out, json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    return report
