"""Pipeline configuration: one JSON document, overridable by dotted keys."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from groundline.captioner import CAPTION_TEMPERATURE, DATASET_FPS, DEFAULT_CAPTION_MODEL
from groundline.grounder import GeneratorConfig, NmsConfig, ScorerConfig, SimilarityMode
from groundline.querygen import DEBIAS_TEMPERATURE, DEFAULT_DEBIAS_MODEL
from groundline.similarity import DEFAULT_EMBED_MODEL

# short flag names accepted in place of dotted paths
ALIASES = {
    "n_q": "n_q",
    "alpha": "scorer.alpha",
    "top_k": "generator.top_k",
    "k": "generator.top_k",
    "n_bins": "generator.n_bins",
    "gap_lambda": "generator.gap_lambda",
    "lambda": "generator.gap_lambda",
    "mu": "nms.iou_threshold",
    "iou_threshold": "nms.iou_threshold",
    "fps": "dataset.fps",
}


@dataclass
class DatasetConfig:
    kind: str = "qvhighlights"
    annotation_path: str | None = None
    frames_dir: str | None = None
    fps: float | None = None
    durations_path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in DATASET_FPS:
            raise ValueError(f"unknown dataset kind {self.kind!r}; expected one of {sorted(DATASET_FPS)}")
        if self.fps is None:
            self.fps = DATASET_FPS[self.kind]
        if not self.fps > 0:
            raise ValueError("dataset.fps must be positive")


@dataclass
class ProvidersConfig:
    chat_base_url: str | None = None
    embed_base_url: str | None = None
    chat_model: str = DEFAULT_DEBIAS_MODEL
    caption_model: str = DEFAULT_CAPTION_MODEL
    embed_model: str = DEFAULT_EMBED_MODEL
    caption_temperature: float = CAPTION_TEMPERATURE
    debias_temperature: float = DEBIAS_TEMPERATURE
    offline_config: str | None = None
    offline_embed_dim: int = 512


@dataclass
class PipelineConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    providers: ProvidersConfig = field(default_factory=ProvidersConfig)
    n_q: int = 5
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    nms: NmsConfig = field(default_factory=NmsConfig)
    cache_dir: str = ".groundline-cache"
    work_dir: str = "runs"
    seed: int = 0
    jobs: int = 4

    def __post_init__(self) -> None:
        if self.n_q < 1:
            raise ValueError("n_q must be >= 1")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["scorer"]["similarity"] = SimilarityMode(self.scorer.similarity).value
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> PipelineConfig:
        data = dict(data)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        nested = {
            "dataset": DatasetConfig,
            "providers": ProvidersConfig,
            "generator": GeneratorConfig,
            "scorer": ScorerConfig,
            "nms": NmsConfig,
        }
        for name, typ in nested.items():
            if name in data:
                sub = data[name]
                allowed = {f.name for f in dataclasses.fields(typ)}
                bad = set(sub) - allowed
                if bad:
                    raise ValueError(f"unknown keys in {name}: {sorted(bad)}")
                data[name] = typ(**sub)
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> PipelineConfig:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def with_overrides(self, overrides: dict[str, Any]) -> PipelineConfig:
        data = self.to_dict()
        for key, value in overrides.items():
            set_dotted(data, ALIASES.get(key, key), value)
        return PipelineConfig.from_dict(data)


def default_config(kind: str = "qvhighlights") -> PipelineConfig:
    return PipelineConfig(dataset=DatasetConfig(kind=kind))


def coerce(value: str, current: Any) -> Any:
    """Parse a command-line string using the type of the value it replaces."""
    if not isinstance(value, str):
        return value
    if isinstance(current, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float) or current is None:
        try:
            return _number(value)
        except ValueError:
            if current is None:
                return None if value.lower() in ("none", "null") else value
            raise
    return value


def _number(value: str) -> float | int:
    if "/" in value:
        num, den = value.split("/", 1)
        return float(num) / float(den)
    try:
        return int(value)
    except ValueError:
        return float(value)


def set_dotted(data: dict, path: str, value: Any) -> None:
    parts = path.split(".")
    node = data
    for part in parts[:-1]:
        if part not in node or not isinstance(node[part], dict):
            raise KeyError(f"unknown config key {path!r}")
        node = node[part]
    if parts[-1] not in node:
        raise KeyError(f"unknown config key {path!r}")
    node[parts[-1]] = coerce(value, node[parts[-1]])


def get_dotted(data: dict, path: str) -> Any:
    node: Any = data
    for part in ALIASES.get(path, path).split("."):
        node = node[part]
    return node
