"""Run configuration: model dimensions, ablations, clustering, training."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, asdict

from .clustering import IMAGE_THRESHOLD, TEXT_THRESHOLD
from .sen import FUSION_STRATEGIES
from .srs import SrsConfig

HEAD_KINDS = ("sen", "memory", "signed", "arith")
CLUSTER_NAMES = ("suc", "rec", "coc")

# command-line ablation names -> AblationConfig overrides
ABLATIONS = {
    "wo-srs": {"use_srs": False},
    "binary-nei": {"srs_mode": "binary_nei"},
    "wo-vi-sen": {"visual_head": "memory"},
    "wo-te-sen": {"textual_head": "memory"},
    "wo-sens": {"visual_head": "memory", "textual_head": "memory"},
    "wo-suc": {"drop_clusters": ("suc",)},
    "wo-rec": {"drop_clusters": ("rec",)},
    "wo-coc": {"drop_clusters": ("coc",)},
    "wo-suc-rec": {"drop_clusters": ("suc", "rec")},
}


@dataclass(frozen=True)
class ModelDims:
    text_in: int = 768
    visual_in: tuple[int, int] = (2048, 2048)
    d_visual: int = 1024
    d_textual: int = 768
    hidden: int = 1024
    aux_dim: int = 0

    def __post_init__(self):
        object.__setattr__(self, "visual_in", tuple(self.visual_in))
        if len(self.visual_in) != 2:
            raise ValueError("visual_in needs one width per visual space (2)")


@dataclass(frozen=True)
class AblationConfig:
    use_srs: bool = True
    srs_mode: str = "full"
    visual_head: str = "sen"
    textual_head: str = "sen"
    drop_clusters: tuple[str, ...] = ()
    fusion: str = "concat"

    def __post_init__(self):
        object.__setattr__(self, "drop_clusters", tuple(sorted(set(self.drop_clusters))))
        if self.srs_mode not in ("full", "binary_nei"):
            raise ValueError(f"srs_mode must be 'full' or 'binary_nei', got {self.srs_mode!r}")
        if self.visual_head not in ("sen", "memory"):
            raise ValueError(f"visual_head must be 'sen' or 'memory', got {self.visual_head!r}")
        if self.textual_head not in HEAD_KINDS:
            raise ValueError(f"textual_head must be one of {HEAD_KINDS}, got {self.textual_head!r}")
        if self.fusion not in FUSION_STRATEGIES:
            raise ValueError(f"fusion must be one of {FUSION_STRATEGIES}, got {self.fusion!r}")
        bad = set(self.drop_clusters) - set(CLUSTER_NAMES)
        if bad:
            raise ValueError(f"unknown clusters to drop: {sorted(bad)}")

    def with_ablation(self, name: str) -> "AblationConfig":
        if name not in ABLATIONS:
            raise ValueError(f"unknown ablation {name!r}; choose from {sorted(ABLATIONS)}")
        over = dict(ABLATIONS[name])
        if "drop_clusters" in over:
            over["drop_clusters"] = tuple(self.drop_clusters) + over["drop_clusters"]
        return dataclasses.replace(self, **over)


@dataclass(frozen=True)
class ClusterConfig:
    text_tau_s: float = TEXT_THRESHOLD
    text_tau_r: float = TEXT_THRESHOLD
    image_tau_s: float = IMAGE_THRESHOLD
    image_tau_r: float = IMAGE_THRESHOLD

    def __post_init__(self):
        if min(asdict(self).values()) <= 0:
            raise ValueError("clustering thresholds must be > 0")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    epochs: int = 60
    lr_min: float = 9e-6
    lr_max: float = 6e-5
    cycle_epochs: int = 8
    train_fraction: float = 1.0
    val_fraction: float = 0.2

    def __post_init__(self):
        if not 0 < self.train_fraction <= 1:
            raise ValueError("train_fraction must be in (0, 1]")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch norm)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    dims: ModelDims = field(default_factory=ModelDims)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    srs: SrsConfig = field(default_factory=SrsConfig)
    clusters: ClusterConfig = field(default_factory=ClusterConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def effective_srs(self) -> SrsConfig:
        """SrsConfig after applying the ablation's SRS mode."""
        if self.ablation.srs_mode == "binary_nei":
            return dataclasses.replace(self.srs, variant="binary_nei")
        return self.srs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"]["visual_in"] = list(self.dims.visual_in)
        d["ablation"]["drop_clusters"] = list(self.ablation.drop_clusters)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return merge(cls(), d)


_SECTIONS = {
    "dims": ModelDims,
    "ablation": AblationConfig,
    "srs": SrsConfig,
    "clusters": ClusterConfig,
    "train": TrainConfig,
}


def merge(base: RunConfig, overrides: dict) -> RunConfig:
    """Apply a nested dict of overrides; unknown keys are an error."""
    changes = {}
    for key, val in overrides.items():
        if key == "seed":
            changes["seed"] = int(val)
            continue
        if key not in _SECTIONS:
            raise ValueError(f"unknown config section {key!r}")
        section = getattr(base, key)
        known = {f.name for f in dataclasses.fields(section)}
        unknown = set(val) - known
        if unknown:
            raise ValueError(f"unknown keys in [{key}]: {sorted(unknown)}")
        v = dict(val)
        for k in ("visual_in", "drop_clusters"):
            if k in v:
                v[k] = tuple(v[k])
        changes[key] = dataclasses.replace(section, **v)
    return dataclasses.replace(base, **changes)
