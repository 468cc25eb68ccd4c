"""Full detector: two visual heads, a textual head, an entity memory head and
a two-layer classifier over their concatenated outputs."""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import neuralcore as nc
from .clustering import assign_clusters
from .config import CLUSTER_NAMES, RunConfig
from .data import LABELS, SCENARIOS, ClaimInstance, DatasetError, dataset_dims
from .entitymatch import EntitySet
from .neuralcore import Param
from .sen import HEADS, SenHead
from .srs import srs_vector

HEAD_NAMES = ("visual0", "visual1", "textual", "entity")
CHECKPOINT_FORMAT = "oocstance-checkpoint/1"


class Model:
    """All trainable state plus the configuration that shaped it."""

    def __init__(self, config: RunConfig, seed: int | None = None):
        self.config = config
        seed = config.seed if seed is None else seed
        rng = np.random.default_rng(seed)
        dims, abl = config.dims, config.ablation
        srs_extra = 1 if abl.use_srs else 0
        specs = {
            "visual0": (abl.visual_head, dims.visual_in[0], dims.visual_in[0], dims.d_visual),
            "visual1": (abl.visual_head, dims.visual_in[1], dims.visual_in[1], dims.d_visual),
            "textual": (abl.textual_head, dims.text_in, dims.text_in + srs_extra, dims.d_textual),
            "entity": ("memory", dims.text_in, dims.text_in + srs_extra, dims.d_textual),
        }
        self.heads = {}
        for name, (kind, c_in, e_in, d) in specs.items():
            cls = HEADS[kind]
            if cls is SenHead:
                self.heads[name] = cls(name, rng, c_in, e_in, d, fusion=abl.fusion)
            else:
                self.heads[name] = cls(name, rng, c_in, e_in, d)
        width = self.classifier_width
        self.W1 = Param("classifier.W1", nc.glorot(rng, dims.hidden, width))
        self.b1 = Param("classifier.b1", np.zeros(dims.hidden))
        self.W2 = Param("classifier.W2", nc.glorot(rng, 2, dims.hidden))
        self.b2 = Param("classifier.b2", np.zeros(2))

    @property
    def classifier_width(self) -> int:
        d = self.config.dims
        return 2 * d.d_visual + 2 * d.d_textual + d.aux_dim

    def params(self) -> list[Param]:
        out = []
        for name in HEAD_NAMES:
            out += self.heads[name].params()
        return out + [self.W1, self.b1, self.W2, self.b2]

    def bn_states(self) -> dict:
        out = {}
        for name in HEAD_NAMES:
            out.update(self.heads[name].bn_states())
        return out

    def snapshot(self) -> dict:
        return {
            "params": {p.name: p.data.copy() for p in self.params()},
            "bn": {k: (s.running_mean.copy(), s.running_var.copy()) for k, s in self.bn_states().items()},
        }

    def restore(self, snap: dict) -> None:
        for p in self.params():
            p.data[...] = snap["params"][p.name]
        for k, s in self.bn_states().items():
            s.running_mean, s.running_var = (a.copy() for a in snap["bn"][k])


def build_model(config: RunConfig = RunConfig(), seed: int | None = None) -> Model:
    return Model(config, seed)


def check_dims(model: Model, instances: Sequence[ClaimInstance]) -> None:
    if not instances:
        return
    got = dataset_dims(list(instances))
    d = model.config.dims
    want = {"text_in": d.text_in, "visual_in": tuple(d.visual_in), "aux_dim": d.aux_dim}
    if got != want:
        raise DatasetError(f"dataset dimensions {got} do not match model dimensions {want}")


# preprocessing ---------------------------------------------------------------


@dataclass
class Prepared:
    """Per-instance inputs derived once: SRS values, SRS-augmented evidence
    and cluster assignments for every clustered head."""

    instance: ClaimInstance
    text_srs: list[float]
    entity_srs: list[float]
    claims: dict
    evidence: dict
    assignments: dict = field(default_factory=dict)


def _augment(emb: np.ndarray, scores: list[float], use_srs: bool) -> np.ndarray:
    if not use_srs:
        return emb
    return np.hstack([emb, np.asarray(scores, dtype=np.float64).reshape(-1, 1)])


def prepare(inst: ClaimInstance, config: RunConfig) -> Prepared:
    srs_cfg = config.effective_srs()
    abl, cl = config.ablation, config.clusters
    text_srs = srs_vector(inst.text_entities, inst.caption_entities, srs_cfg)
    ent_docs = [EntitySet.from_raw([t]) for t in inst.entity_texts]
    entity_srs = srs_vector(ent_docs, inst.caption_entities, srs_cfg)
    claims = {
        "visual0": inst.image_embeddings[0],
        "visual1": inst.image_embeddings[1],
        "textual": inst.caption_embedding,
        "entity": inst.caption_embedding,
    }
    evidence = {
        "visual0": inst.visual_evidence[0],
        "visual1": inst.visual_evidence[1],
        "textual": _augment(inst.text_embeddings, text_srs, abl.use_srs),
        "entity": _augment(inst.entity_embeddings, entity_srs, abl.use_srs),
    }
    # clusters are formed on the encoder outputs, before the SRS column
    raw = {
        "visual0": (inst.visual_evidence[0], cl.image_tau_s, cl.image_tau_r),
        "visual1": (inst.visual_evidence[1], cl.image_tau_s, cl.image_tau_r),
        "textual": (inst.text_embeddings, cl.text_tau_s, cl.text_tau_r),
    }
    assignments = {
        name: assign_clusters(claims[name], ev, ts, tr) for name, (ev, ts, tr) in raw.items()
    }
    return Prepared(inst, text_srs, entity_srs, claims, evidence, assignments)


def _masks(prep: Prepared, head: str, kind: str, width: int, drop: tuple) -> dict:
    n = len(prep.evidence[head])
    valid = np.zeros(width, dtype=bool)
    valid[:n] = True
    if kind != "sen":
        return {"all": valid}
    a = prep.assignments[head]
    removed = set()
    for c in drop:
        removed |= a.members(c)
    out = {}
    for c in CLUSTER_NAMES:
        m = np.zeros(width, dtype=bool)
        m[sorted(a.members(c) - removed)] = True
        out[c] = m
    return out


@dataclass
class Batch:
    claims: dict
    evidence: dict
    masks: dict
    aux: np.ndarray | None
    labels: np.ndarray
    prepared: list


def collate(prepared: Sequence[Prepared], model: Model) -> Batch:
    abl = model.config.ablation
    claims, evidence, masks = {}, {}, {}
    for head in HEAD_NAMES:
        kind = model.heads[head].kind
        width = max(1, max(len(p.evidence[head]) for p in prepared))
        feat = model.heads[head].proj.Wk.shape[1]
        ev = np.zeros((len(prepared), width, feat))
        per = []
        for i, p in enumerate(prepared):
            e = p.evidence[head]
            if len(e):
                if e.shape[1] != feat:
                    raise DatasetError(f"{head} evidence width {e.shape[1]} != model input width {feat}")
                ev[i, : len(e)] = e
            per.append(_masks(p, head, kind, width, abl.drop_clusters))
        claims[head] = np.vstack([p.claims[head] for p in prepared])
        evidence[head] = ev
        masks[head] = {k: np.vstack([m[k] for m in per]) for k in per[0]}
    aux = None
    if model.config.dims.aux_dim:
        aux = np.vstack([p.instance.aux_features for p in prepared])
    labels = np.array([p.instance.label_index for p in prepared])
    return Batch(claims, evidence, masks, aux, labels, list(prepared))


# forward / inference -----------------------------------------------------------


@dataclass
class Diagnostics:
    srs: list[float]
    entity_srs: list[float]
    clusters: dict
    attention: dict
    probability_falsified: float
    logits: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "srs": self.srs,
            "entity_srs": self.entity_srs,
            "clusters": self.clusters,
            "attention": self.attention,
            "probability_falsified": self.probability_falsified,
            "logits": list(self.logits),
        }


def forward_batch(model: Model, batch: Batch, train: bool = False, update_stats: bool = True):
    """Logits tensor ``(B, 2)`` and per-head attention weights."""
    outs, weights = [], {}
    for head in HEAD_NAMES:
        h = model.heads[head]
        if train and not update_stats:
            out, w = _forward_frozen_stats(h, batch, head)
        else:
            out, w = h.forward(batch.claims[head], batch.evidence[head], batch.masks[head], train)
        outs.append(out)
        weights[head] = w
    if batch.aux is not None:
        outs.append(nc.as_tensor(batch.aux))
    x = nc.concat(outs, axis=-1)
    hidden = nc.relu(nc.linear(x, model.W1, model.b1))
    return nc.linear(hidden, model.W2, model.b2), weights


def _forward_frozen_stats(head, batch: Batch, name: str):
    saved = {k: (s.running_mean.copy(), s.running_var.copy()) for k, s in head.bn_states().items()}
    try:
        return head.forward(batch.claims[name], batch.evidence[name], batch.masks[name], True)
    finally:
        for k, s in head.bn_states().items():
            s.running_mean, s.running_var = saved[k]


def _diagnostics(batch: Batch, logits: np.ndarray, weights: dict, model: Model) -> list[Diagnostics]:
    probs = np.exp(logits - logits.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    out = []
    for i, p in enumerate(batch.prepared):
        clusters = {k: a.to_dict() for k, a in p.assignments.items()}
        attention = {}
        for head, per in weights.items():
            attention[head] = {}
            for cname, alpha in per.items():
                mask = batch.masks[head].get(cname, batch.masks[head].get("all"))
                idx = np.flatnonzero(mask[i])
                attention[head][cname] = {int(j): float(alpha[i, j]) for j in idx}
        out.append(
            Diagnostics(
                srs=list(p.text_srs),
                entity_srs=list(p.entity_srs),
                clusters=clusters,
                attention=attention,
                probability_falsified=float(probs[i, 1]),
                logits=(float(logits[i, 0]), float(logits[i, 1])),
            )
        )
    return out


def forward(model: Model, instances: Sequence[ClaimInstance], train: bool = False):
    """Logits ``(B, 2)`` and a Diagnostics record per instance."""
    check_dims(model, instances)
    prepared = [prepare(x, model.config) for x in instances]
    batch = collate(prepared, model)
    logits, weights = forward_batch(model, batch, train)
    return logits.data, _diagnostics(batch, logits.data, weights, model)


def predict(model: Model, instance: ClaimInstance) -> tuple[str, Diagnostics]:
    """Label by argmax of the logits; a tie goes to index 0 (pristine)."""
    logits, diags = forward(model, [instance])
    return LABELS[int(np.argmax(logits[0]))], diags[0]


def predict_prepared(model: Model, prepared: Sequence[Prepared], batch_size: int = 256) -> np.ndarray:
    preds = []
    for start in range(0, len(prepared), batch_size):
        batch = collate(prepared[start : start + batch_size], model)
        logits, _ = forward_batch(model, batch, train=False)
        preds.append(np.argmax(logits.data, axis=1))
    return np.concatenate(preds) if preds else np.zeros(0, dtype=int)


# evaluation --------------------------------------------------------------------


def accuracy_slices(labels: Sequence[int], preds: Sequence[int], scenarios: Sequence[str]) -> dict:
    """Accuracy overall, per label and per scenario a-d; ``None`` if a slice is empty."""
    labels = np.asarray(labels)
    preds = np.asarray(preds)
    scen = np.asarray(scenarios)
    correct = labels == preds

    def acc(sel):
        n = int(sel.sum())
        return (None if n == 0 else float(correct[sel].sum()) / n), n

    out = {}
    slices = {"all": np.ones(len(labels), dtype=bool)}
    slices["pristine"] = labels == 0
    slices["falsified"] = labels == 1
    for s in SCENARIOS[:4]:
        slices[f"scenario_{s}"] = scen == s
    for name, sel in slices.items():
        out[f"accuracy_{name}"], out[f"count_{name}"] = acc(sel)
    out["correct_all"] = int(correct.sum())
    return out


def evaluate(model: Model, instances: Sequence[ClaimInstance]) -> dict:
    check_dims(model, instances)
    prepared = [prepare(x, model.config) for x in instances]
    preds = predict_prepared(model, prepared)
    return accuracy_slices([x.label_index for x in instances], preds, [x.scenario for x in instances])


# training ----------------------------------------------------------------------


def subsample(n: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices of ``floor(n * fraction)`` distinct items."""
    if fraction >= 1:
        return np.arange(n)
    k = int(math.floor(n * fraction))
    if k < 2:
        raise ValueError(f"train_fraction {fraction} leaves {k} instances; need at least 2")
    return np.sort(rng.choice(n, size=k, replace=False))


def split_validation(instances: Sequence[ClaimInstance], fraction: float, seed: int):
    """Deterministic train/validation split (validation may be empty)."""
    n = len(instances)
    k = int(math.floor(n * fraction))
    order = np.random.default_rng(seed).permutation(n)
    val = sorted(order[:k])
    tr = sorted(order[k:])
    return [instances[i] for i in tr], [instances[i] for i in val]


def _batches(order: np.ndarray, size: int) -> list[np.ndarray]:
    chunks = [order[i : i + size] for i in range(0, len(order), size)]
    # train-mode batch norm cannot take a single row
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def _mean_loss(model: Model, prepared: list[Prepared], size: int) -> float:
    losses, weights = [], []
    for chunk in _batches(np.arange(len(prepared)), size):
        batch = collate([prepared[i] for i in chunk], model)
        logits, _ = forward_batch(model, batch, train=True, update_stats=False)
        losses.append(float(nc.cross_entropy(logits, batch.labels).data))
        weights.append(len(chunk))
    return float(np.average(losses, weights=weights))


def train(
    train_set: Sequence[ClaimInstance],
    config: RunConfig = RunConfig(),
    val_set: Sequence[ClaimInstance] | None = None,
    log=None,
) -> tuple[Model, dict]:
    """Minimize mean cross-entropy with Adam under a cyclical learning rate.

    With a validation set the returned model is the epoch with the best
    validation accuracy (earliest on ties); otherwise the last epoch.
    """
    if not train_set:
        raise ValueError("cannot train on an empty dataset")
    tc = config.train
    rng = np.random.default_rng(config.seed)
    chosen = subsample(len(train_set), tc.train_fraction, rng)
    subset = [train_set[i] for i in chosen]
    if len(subset) < 2:
        raise ValueError("training needs at least 2 instances")

    model = build_model(config)
    check_dims(model, subset)
    if val_set:
        check_dims(model, val_set)
    prepared = [prepare(x, config) for x in subset]
    val_prepared = [prepare(x, config) for x in val_set] if val_set else []
    val_labels = np.array([p.instance.label_index for p in val_prepared])

    steps_per_epoch = len(_batches(np.arange(len(prepared)), tc.batch_size))
    schedule = nc.LrSchedule(tc.lr_min, tc.lr_max, max(2, tc.cycle_epochs * steps_per_epoch))
    opt = nc.Adam(model.params())

    history = {
        "train_size": len(subset),
        "train_ids": [x.id for x in subset],
        "init_loss": _mean_loss(model, prepared, tc.batch_size),
        "loss": [],
        "val_accuracy": [],
        "lr_last": [],
    }
    best_acc, best_snap, best_epoch = -1.0, None, None
    step = 0
    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(len(prepared))
        total, count = 0.0, 0
        lr = tc.lr_min
        for chunk in _batches(order, tc.batch_size):
            batch = collate([prepared[i] for i in chunk], model)
            opt.zero_grad()
            logits, _ = forward_batch(model, batch, train=True)
            loss = nc.cross_entropy(logits, batch.labels)
            loss.backward()
            lr = nc.cyclical_lr(step, schedule)
            opt.step(lr)
            step += 1
            total += float(loss.data) * len(chunk)
            count += len(chunk)
        history["loss"].append(total / count)
        history["lr_last"].append(lr)
        if val_prepared:
            acc = float(np.mean(predict_prepared(model, val_prepared) == val_labels))
            history["val_accuracy"].append(acc)
            if acc > best_acc:
                best_acc, best_snap, best_epoch = acc, model.snapshot(), epoch
        if log is not None:
            va = history["val_accuracy"][-1] if val_prepared else float("nan")
            log(f"epoch {epoch:3d}  loss {history['loss'][-1]:.6f}  val_acc {va:.4f}  lr {lr:.3e}")
    if best_snap is not None:
        model.restore(best_snap)
        history["best_epoch"] = best_epoch
        history["best_val_accuracy"] = best_acc
    else:
        history["best_epoch"] = tc.epochs
    return model, history


# checkpoints -------------------------------------------------------------------


def _encode(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "dtype": "<f8", "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(d: dict) -> np.ndarray:
    if d.get("dtype") != "<f8":
        raise ValueError(f"unsupported dtype {d.get('dtype')!r}")
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).copy()


def save_checkpoint(model: Model, path, history: dict | None = None) -> None:
    """Write a JSON checkpoint; float64 arrays are base64 little-endian bytes,
    so a write/read round trip is bit-exact."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": model.config.to_dict(),
        "params": {p.name: _encode(p.data) for p in model.params()},
        "batchnorm": {
            k: {
                "running_mean": _encode(s.running_mean),
                "running_var": _encode(s.running_var),
                "momentum": s.momentum,
                "eps": s.eps,
            }
            for k, s in model.bn_states().items()
        },
    }
    if history is not None:
        doc["history"] = history
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path) -> tuple[Model, dict]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    model = build_model(RunConfig.from_dict(doc["config"]))
    stored = doc["params"]
    names = {p.name for p in model.params()}
    if set(stored) != names:
        raise ValueError(f"{path}: parameter names do not match the stored configuration")
    for p in model.params():
        arr = _decode(stored[p.name])
        if arr.shape != p.data.shape:
            raise ValueError(f"{path}: {p.name} has shape {arr.shape}, expected {p.data.shape}")
        p.data = arr
    for k, s in model.bn_states().items():
        rec = doc["batchnorm"][k]
        s.running_mean = _decode(rec["running_mean"])
        s.running_var = _decode(rec["running_var"])
        s.momentum, s.eps = rec["momentum"], rec["eps"]
    return model, doc.get("history", {})
