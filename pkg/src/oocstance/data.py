"""Claim instances, the JSON-lines dataset format, and a synthetic generator.

One record per line::

    {"id": "...", "label": "pristine" | "falsified", "scenario": "a".."d" | "none",
     "caption_entities": [str], "caption_embedding": [float],
     "image_embeddings": [[float], [float]],           # one per visual space
     "visual_evidence": [[[float], [float]], ...],     # per item, both spaces
     "textual_evidence": [{"embedding": [float], "entities": [str]}, ...],
     "entity_evidence": [{"embedding": [float], "text": str}, ...],
     "aux_features": [float]}                          # optional
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .entitymatch import EntitySet

LABELS = ("pristine", "falsified")
SCENARIOS = ("a", "b", "c", "d", "none")
MAX_VISUAL_EVIDENCE = 10


class DatasetError(ValueError):
    """A record failed validation; carries the 1-based line and field."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line, self.field = line, field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


def _empty(width: int = 0) -> np.ndarray:
    return np.zeros((0, width))


@dataclass(eq=False)
class ClaimInstance:
    id: str
    label: str
    caption_embedding: np.ndarray
    image_embeddings: tuple[np.ndarray, np.ndarray]
    caption_entities: EntitySet = field(default_factory=EntitySet)
    scenario: str = "none"
    # (N, dim) per visual space; row i of both arrays is the same evidence item
    visual_evidence: tuple[np.ndarray, np.ndarray] = (_empty(), _empty())
    text_embeddings: np.ndarray = field(default_factory=_empty)
    text_entities: list[EntitySet] = field(default_factory=list)
    entity_embeddings: np.ndarray = field(default_factory=_empty)
    entity_texts: list[str] = field(default_factory=list)
    aux_features: np.ndarray | None = None

    @property
    def label_index(self) -> int:
        return LABELS.index(self.label)

    def to_record(self) -> dict:
        rec = {
            "id": self.id,
            "label": self.label,
            "scenario": self.scenario,
            "caption_entities": list(self.caption_entities),
            "caption_embedding": self.caption_embedding.tolist(),
            "image_embeddings": [e.tolist() for e in self.image_embeddings],
            "visual_evidence": [
                [self.visual_evidence[0][i].tolist(), self.visual_evidence[1][i].tolist()]
                for i in range(len(self.visual_evidence[0]))
            ],
            "textual_evidence": [
                {"embedding": emb.tolist(), "entities": list(ents)}
                for emb, ents in zip(self.text_embeddings, self.text_entities)
            ],
            "entity_evidence": [
                {"embedding": emb.tolist(), "text": txt}
                for emb, txt in zip(self.entity_embeddings, self.entity_texts)
            ],
        }
        if self.aux_features is not None:
            rec["aux_features"] = self.aux_features.tolist()
        return rec

    def __eq__(self, other) -> bool:
        if not isinstance(other, ClaimInstance):
            return NotImplemented
        return self.to_record() == other.to_record()


def _vector(value, name: str, line: int | None, dim: int | None = None) -> np.ndarray:
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise DatasetError("expected a list of numbers", line, name)
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DatasetError("non-finite value", line, name)
    if dim is not None and arr.shape[0] != dim:
        raise DatasetError(f"expected {dim} dimensions, got {arr.shape[0]}", line, name)
    return arr


def _strings(value, name: str, line: int | None) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise DatasetError("expected a list of strings", line, name)
    return value


def from_record(rec: dict, line: int | None = None, dims: dict | None = None) -> ClaimInstance:
    """Validate one record. ``dims`` pins embedding widths and is filled in
    from the first record when empty."""
    if not isinstance(rec, dict):
        raise DatasetError("record must be a JSON object", line)
    dims = {} if dims is None else dims
    for key in ("id", "label", "caption_embedding", "image_embeddings"):
        if key not in rec:
            raise DatasetError("missing required field", line, key)
    label = rec["label"]
    if label not in LABELS:
        raise DatasetError(f"unknown label {label!r}", line, "label")
    scenario = rec.get("scenario", "none")
    if scenario not in SCENARIOS:
        raise DatasetError(f"unknown scenario {scenario!r}", line, "scenario")

    cap = _vector(rec["caption_embedding"], "caption_embedding", line, dims.get("text"))
    dims.setdefault("text", cap.shape[0])

    imgs = rec["image_embeddings"]
    if not isinstance(imgs, list) or len(imgs) != 2:
        raise DatasetError("expected exactly two visual spaces", line, "image_embeddings")
    images = []
    for s in range(2):
        v = _vector(imgs[s], f"image_embeddings[{s}]", line, dims.get(f"visual{s}"))
        dims.setdefault(f"visual{s}", v.shape[0])
        images.append(v)

    vis_items = rec.get("visual_evidence", [])
    if not isinstance(vis_items, list):
        raise DatasetError("expected a list", line, "visual_evidence")
    if len(vis_items) > MAX_VISUAL_EVIDENCE:
        raise DatasetError(f"at most {MAX_VISUAL_EVIDENCE} items allowed", line, "visual_evidence")
    vis = [[], []]
    for i, item in enumerate(vis_items):
        if not isinstance(item, list) or len(item) != 2:
            raise DatasetError("each item needs both visual spaces", line, f"visual_evidence[{i}]")
        for s in range(2):
            vis[s].append(_vector(item[s], f"visual_evidence[{i}][{s}]", line, dims[f"visual{s}"]))

    text_emb, text_ents = [], []
    for i, item in enumerate(rec.get("textual_evidence", [])):
        name = f"textual_evidence[{i}]"
        if not isinstance(item, dict) or "embedding" not in item:
            raise DatasetError("expected {embedding, entities}", line, name)
        text_emb.append(_vector(item["embedding"], f"{name}.embedding", line, dims["text"]))
        text_ents.append(EntitySet.from_raw(_strings(item.get("entities", []), f"{name}.entities", line)))

    ent_emb, ent_txt = [], []
    for i, item in enumerate(rec.get("entity_evidence", [])):
        name = f"entity_evidence[{i}]"
        if not isinstance(item, dict) or "embedding" not in item or not isinstance(item.get("text"), str):
            raise DatasetError("expected {embedding, text}", line, name)
        ent_emb.append(_vector(item["embedding"], f"{name}.embedding", line, dims["text"]))
        ent_txt.append(item["text"])

    aux = None
    if rec.get("aux_features") is not None:
        aux = _vector(rec["aux_features"], "aux_features", line, dims.get("aux"))
        dims.setdefault("aux", aux.shape[0])
    elif dims.get("aux"):
        raise DatasetError("missing aux_features present in earlier records", line, "aux_features")
    else:
        dims.setdefault("aux", 0)

    def stack(rows, width):
        return np.vstack(rows) if rows else _empty(width)

    return ClaimInstance(
        id=str(rec["id"]),
        label=label,
        scenario=scenario,
        caption_embedding=cap,
        caption_entities=EntitySet.from_raw(_strings(rec.get("caption_entities", []), "caption_entities", line)),
        image_embeddings=(images[0], images[1]),
        visual_evidence=(stack(vis[0], dims["visual0"]), stack(vis[1], dims["visual1"])),
        text_embeddings=stack(text_emb, dims["text"]),
        text_entities=text_ents,
        entity_embeddings=stack(ent_emb, dims["text"]),
        entity_texts=ent_txt,
        aux_features=aux,
    )


def ingest(path) -> list[ClaimInstance]:
    """Parse and validate a JSON-lines dataset; blank lines are skipped."""
    out = []
    dims: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON ({exc.msg})", lineno) from None
            out.append(from_record(rec, lineno, dims))
    return out


def write_dataset(instances: Iterable[ClaimInstance], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_record(), separators=(",", ":")) + "\n")


def dataset_dims(instances: list[ClaimInstance]) -> dict:
    if not instances:
        raise DatasetError("empty dataset")
    x = instances[0]
    aux = 0 if x.aux_features is None else x.aux_features.shape[0]
    return {
        "text_in": x.caption_embedding.shape[0],
        "visual_in": (x.image_embeddings[0].shape[0], x.image_embeddings[1].shape[0]),
        "aux_dim": aux,
    }


# synthetic data --------------------------------------------------------------

ENTITY_POOL = (
    "Angela Merkel", "Nairobi", "Toyota", "Mount Fuji", "Barcelona", "Greenpeace",
    "Justin Trudeau", "Cairo", "Nintendo", "Amazon River", "Helsinki", "UNICEF",
    "Serena Williams", "Lima", "Volkswagen", "Sahara", "Reykjavik", "Red Cross",
    "Narendra Modi", "Jakarta", "Samsung", "Danube", "Montevideo", "NATO",
    "Greta Thunberg", "Havana", "Siemens", "Kilimanjaro", "Tbilisi", "Interpol",
    "Lionel Messi", "Quito", "Boeing", "Yangtze", "Oslo", "FIFA",
    "Jacinda Ardern", "Dakar", "Heineken", "Everest", "Kyiv", "WHO",
    "Pope Francis", "Manila", "Unilever", "Mekong", "Bogota", "Oxfam",
)


@dataclass(frozen=True)
class SynthProfile:
    """Sizes and noise levels for :func:`synth_generate`.

    Embedding noise is large on purpose: the named-entity channel carries the
    clean signal, the embeddings only a weak one.
    """

    text_dim: int = 16
    visual_dims: tuple[int, int] = (12, 12)
    text_evidence: tuple[int, int] = (4, 8)
    visual_evidence: tuple[int, int] = (3, 6)
    entity_evidence: tuple[int, int] = (2, 4)
    aux_dim: int = 0
    claim_noise: float = 0.3
    evidence_noise: float = 1.2
    topic_overlap: float = 0.6


def _unit(rng, dim):
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _near(rng, center, noise, count):
    return center[None, :] + noise * rng.normal(size=(count, center.shape[0])) / math.sqrt(center.shape[0])


def _related(rng, topic, overlap):
    other = _unit(rng, topic.shape[0])
    v = overlap * topic + math.sqrt(1 - overlap**2) * other
    return v / np.linalg.norm(v)


def _synth_one(rng, i: int, p: SynthProfile) -> ClaimInstance:
    label = LABELS[i % 2]
    scenario = "abcd"[(i // 2) % 4]
    falsified = label == "falsified"
    names = rng.permutation(len(ENTITY_POOL))
    cap_names = [ENTITY_POOL[j] for j in names[: rng.integers(2, 4)]]
    other_names = [ENTITY_POOL[j] for j in names[4 : 4 + rng.integers(2, 4)]]
    noise_pool = [ENTITY_POOL[j] for j in names[8:]]

    topic = _unit(rng, p.text_dim)
    caption = topic + p.claim_noise * rng.normal(size=p.text_dim) / math.sqrt(p.text_dim)
    ev_topic = _related(rng, topic, p.topic_overlap) if falsified else topic
    evidence_names = other_names if falsified else cap_names

    m = int(rng.integers(p.text_evidence[0], p.text_evidence[1] + 1))
    text_emb = _near(rng, ev_topic, p.evidence_noise, m)
    noise_iter = iter(noise_pool)
    text_ents = []
    for k in range(m):
        chosen = list(rng.choice(evidence_names, size=rng.integers(1, 3), replace=False))
        # same-person-in-another-context case: one falsified doc keeps a caption name
        if falsified and scenario == "c" and k == 0:
            chosen.append(cap_names[0])
        if rng.random() < 0.5:
            chosen.append(next(noise_iter))
        text_ents.append(EntitySet.from_raw(chosen))

    images = []
    vis = []
    n_vis = int(rng.integers(p.visual_evidence[0], p.visual_evidence[1] + 1))
    for s in range(2):
        img_topic = _unit(rng, p.visual_dims[s])
        images.append(img_topic + p.claim_noise * rng.normal(size=p.visual_dims[s]) / math.sqrt(p.visual_dims[s]))
        vt = _related(rng, img_topic, p.topic_overlap) if falsified else img_topic
        vis.append(_near(rng, vt, p.evidence_noise, n_vis))

    k_ent = int(rng.integers(p.entity_evidence[0], p.entity_evidence[1] + 1))
    ent_texts = [str(rng.choice(evidence_names)) for _ in range(k_ent)]
    ent_emb = _near(rng, ev_topic, p.evidence_noise, k_ent)

    aux = rng.normal(size=p.aux_dim) if p.aux_dim else None
    return ClaimInstance(
        id=f"synth-{i:05d}",
        label=label,
        scenario=scenario,
        caption_embedding=caption,
        caption_entities=EntitySet.from_raw(cap_names),
        image_embeddings=(images[0], images[1]),
        visual_evidence=(vis[0], vis[1]),
        text_embeddings=text_emb,
        text_entities=text_ents,
        entity_embeddings=ent_emb,
        entity_texts=ent_texts,
        aux_features=aux,
    )


def synth_generate(n: int, seed: int = 0, profile: SynthProfile = SynthProfile()) -> list[ClaimInstance]:
    """Balanced synthetic dataset with a planted entity-overlap signal.

    Pristine evidence mentions the caption's entities; falsified evidence
    repeats a different set of names, so those show up as frequent
    conflicting entities. Labels alternate; scenarios cycle a-d over label
    pairs so every scenario holds both labels.
    """
    if n < 2:
        raise ValueError("synth_generate needs n >= 2")
    rng = np.random.default_rng(seed)
    return [_synth_one(rng, i, profile) for i in range(n)]
