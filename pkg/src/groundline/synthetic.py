"""Synthetic corpus for exercising the full pipeline offline.

Frames are tiny JPEGs with unique pixel patterns; their captions, and the
rephrasings of every query, are stored in an offline-provider config keyed by
frame digest and query text. Each query's event frames have captions that
share its vocabulary, so grounding on the corpus is meaningful rather than
noise.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from groundline._io import atomic_write_bytes, atomic_write_text, dumps_jsonl
from groundline.config import DatasetConfig, PipelineConfig, ProvidersConfig

TOPICS = [
    ("dog", "chasing", "ball", "beach"),
    ("woman", "cooking", "pasta", "kitchen"),
    ("man", "riding", "bicycle", "street"),
    ("girl", "painting", "picture", "studio"),
    ("children", "playing", "soccer", "park"),
    ("chef", "slicing", "vegetables", "counter"),
    ("couple", "dancing", "music", "hall"),
    ("boy", "swimming", "pool", "summer"),
    ("tourist", "photographing", "tower", "city"),
    ("cat", "sleeping", "sofa", "livingroom"),
    ("driver", "parking", "truck", "garage"),
    ("singer", "performing", "concert", "stage"),
]
SYNONYMS = {
    "dog": "puppy", "chasing": "running after", "ball": "toy", "beach": "shore",
    "woman": "lady", "cooking": "preparing", "pasta": "noodles", "kitchen": "cookhouse",
    "man": "guy", "riding": "cycling on", "bicycle": "bike", "street": "road",
    "girl": "young woman", "painting": "drawing", "picture": "image", "studio": "workshop",
    "children": "kids", "playing": "kicking", "soccer": "football", "park": "field",
    "chef": "cook", "slicing": "cutting", "vegetables": "veggies", "counter": "worktop",
    "couple": "pair", "dancing": "moving", "music": "song", "hall": "ballroom",
    "boy": "kid", "swimming": "diving", "pool": "water", "summer": "sunshine",
    "tourist": "traveler", "photographing": "shooting", "tower": "monument", "city": "town",
    "cat": "kitten", "sleeping": "napping", "sofa": "couch", "livingroom": "lounge",
    "driver": "trucker", "parking": "reversing", "truck": "lorry", "garage": "depot",
    "singer": "vocalist", "performing": "singing", "concert": "show", "stage": "platform",
}
FILLER = [
    "wall", "window", "light", "table", "sky", "car", "people", "tree", "door", "floor",
    "building", "corridor", "shadow", "chair", "screen", "bag", "grass", "cloud", "sign", "lamp",
]


@dataclass(frozen=True)
class SyntheticCorpus:
    root: Path
    annotation_path: Path
    frames_dir: Path
    offline_config: Path
    config_path: Path
    n_videos: int
    n_queries: int


def _frame_jpeg(video_idx: int, frame_idx: int) -> bytes:
    arr = np.zeros((16, 16, 3), dtype=np.uint8)
    arr[..., 0] = (video_idx * 37) % 256
    arr[..., 1] = (frame_idx * 11) % 256
    # 8x8 blocks carry the indices exactly enough to keep every frame's bytes distinct
    arr[:8, :8, 2] = video_idx
    arr[8:, 8:, 2] = frame_idx
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="JPEG", quality=90)
    return buf.getvalue()


def _rephrasings(words: tuple[str, ...], rng: np.random.Generator, n: int) -> list[str]:
    subject, action, obj, place = words
    out = []
    for i in range(n):
        swap = rng.random(4) < 0.5
        s, a, o, p = (SYNONYMS[w] if flip else w for w, flip in zip(words, swap))
        template = i % 3
        if template == 0:
            out.append(f"A {s} is {a} the {o} at the {p}.")
        elif template == 1:
            out.append(f"At the {p}, a {s} is {a} a {o}.")
        else:
            out.append(f"The {o} being {a.replace('ing', 'ed', 1) if a.endswith('ing') else a} by a {s} in the {p}.")
    return out


def _event_caption(words: tuple[str, ...], rng: np.random.Generator) -> str:
    s, a, o, p = words
    keep = [w for w in (s, a, o, p) if rng.random() < 0.85] or [s]
    return f"A photo of a {' '.join(keep)} with a {rng.choice(FILLER)} in the background."


def _background_caption(rng: np.random.Generator) -> str:
    a, b, c = rng.choice(FILLER, size=3, replace=False)
    return f"An image showing a {a} next to a {b} and a {c}."


def make_corpus(
    root: str | Path,
    n_videos: int = 20,
    queries_per_video: int = 2,
    seed: int = 7,
    fps: float = 0.5,
    n_q: int = 5,
) -> SyntheticCorpus:
    """Write annotations, frames, an offline-provider config and a pipeline config under ``root``."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    frames_dir = root / "frames"
    captions: dict[str, str] = {}
    rephrasings: dict[str, list[str]] = {}
    records = []
    qid = 0
    for v in range(n_videos):
        vid = f"synthetic_{v:03d}"
        n_frames = int(rng.integers(30, 76))
        duration = n_frames / fps
        topics = rng.choice(len(TOPICS), size=queries_per_video, replace=False)
        # disjoint events: cut the timeline into equal slots, one event per slot
        slot = n_frames // queries_per_video
        events = []
        for i, t in enumerate(topics):
            length = int(rng.integers(3, max(4, min(15, slot - 2))))
            start = i * slot + int(rng.integers(0, max(1, slot - length)))
            events.append((TOPICS[t], start, start + length - 1))
        frame_caption = [_background_caption(rng) for _ in range(n_frames)]
        for words, s, e in events:
            for j in range(s, e + 1):
                frame_caption[j] = _event_caption(words, rng)
        for j in range(n_frames):
            data = _frame_jpeg(v, j)
            atomic_write_bytes(frames_dir / vid / f"{j:06d}.jpg", data)
            captions[hashlib.sha256(data).hexdigest()] = frame_caption[j]
        for words, s, e in events:
            text = f"{words[0]} {words[1]} {words[2]} at the {words[3]}"
            rephrasings[text] = _rephrasings(words, rng, n_q)
            clip_ids = list(range(s, e + 1))
            records.append({
                "qid": qid,
                "query": text,
                "duration": duration,
                "vid": vid,
                "relevant_windows": [[s / fps, (e + 1) / fps]],
                "relevant_clip_ids": clip_ids,
                "saliency_scores": [[int(x) for x in rng.integers(1, 5, size=3)] for _ in clip_ids],
            })
            qid += 1
    annotation = root / "annotations.jsonl"
    atomic_write_text(annotation, dumps_jsonl(records))
    offline = root / "offline_providers.json"
    atomic_write_text(offline, json.dumps({"captions": captions, "rephrasings": rephrasings}, indent=1, sort_keys=True))
    cfg = PipelineConfig(
        dataset=DatasetConfig("qvhighlights", str(annotation), str(frames_dir), fps),
        providers=ProvidersConfig(offline_config=str(offline)),
        n_q=n_q,
        cache_dir=str(root / "cache"),
        work_dir=str(root / "work"),
        seed=seed,
    )
    config_path = root / "config.json"
    atomic_write_text(config_path, cfg.dumps())
    return SyntheticCorpus(root, annotation, frames_dir, offline, config_path, n_videos, len(records))
