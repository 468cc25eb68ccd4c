"""Stance extraction heads over padded evidence batches.

Shapes used throughout: claims ``(B, c_in)``, evidence ``(B, M, e_in)`` with a
boolean mask ``(B, M)`` per evidence subset. Padding rows are never attended
to, so their contents do not matter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neuralcore as nc
from .neuralcore import BatchNormState, Param, Tensor

CLUSTERS = ("suc", "rec", "coc")
FUSION_STRATEGIES = ("concat", "max_pool", "avg_pool", "elementwise_mul", "all_with_fc")


@dataclass
class Projections:
    """Query projection of the claim, key/value projections of evidence."""

    Wc: Param
    bc: Param
    Wk: Param
    bk: Param
    Wv: Param
    bv: Param

    @classmethod
    def create(cls, name, rng, claim_in, evidence_in, d):
        return cls(
            Param(f"{name}.Wc", nc.glorot(rng, d, claim_in)),
            Param(f"{name}.bc", np.zeros(d)),
            Param(f"{name}.Wk", nc.glorot(rng, d, evidence_in)),
            Param(f"{name}.bk", np.zeros(d)),
            Param(f"{name}.Wv", nc.glorot(rng, d, evidence_in)),
            Param(f"{name}.bv", np.zeros(d)),
        )

    def params(self) -> list[Param]:
        return [self.Wc, self.bc, self.Wk, self.bk, self.Wv, self.bv]


def project_claim(claim, proj: Projections) -> Tensor:
    return nc.relu(nc.linear(nc.as_tensor(claim), proj.Wc, proj.bc))


def project_evidence(evidence, proj: Projections) -> tuple[Tensor, Tensor]:
    ev = nc.as_tensor(evidence)
    keys = nc.relu(nc.linear(ev, proj.Wk, proj.bk))
    values = nc.relu(nc.linear(ev, proj.Wv, proj.bv))
    return keys, values


def attention_weights(hc: Tensor, keys: Tensor, mask, sign: float = 1.0) -> Tensor:
    b, d = hc.shape
    scores = nc.sum_(nc.reshape(hc, (b, 1, d)) * keys, axis=-1)
    if sign < 0:
        scores = -scores
    return nc.masked_softmax(scores, mask)


def pool(alpha: Tensor, values: Tensor) -> Tensor:
    b, m = alpha.shape
    return nc.sum_(nc.reshape(alpha, (b, m, 1)) * values, axis=1)


def cluster_attention(hc, keys, values, mask, bn: BatchNormState, train: bool):
    """``BN(softmax(hc . k) . v + hc)`` over the masked cluster.

    An empty cluster contributes a zero weighted sum, giving ``BN(hc)``.
    Returns the representation and the attention weights.
    """
    alpha = attention_weights(hc, keys, mask)
    return nc.batchnorm(pool(alpha, values) + hc, bn, train), alpha


def reduce_clusters(reps: list[Tensor], strategy: str) -> Tensor:
    if strategy == "concat":
        return nc.concat(reps, axis=-1)
    stacked = nc.stack(reps, axis=0)
    if strategy == "max_pool":
        return nc.max_(stacked, axis=0)
    if strategy == "avg_pool":
        return nc.mean(stacked, axis=0)
    if strategy == "elementwise_mul":
        return reps[0] * reps[1] * reps[2]
    if strategy == "all_with_fc":
        return nc.concat(
            [nc.max_(stacked, axis=0), nc.mean(stacked, axis=0), reps[0] * reps[1] * reps[2]],
            axis=-1,
        )
    raise ValueError(f"unknown fusion strategy {strategy!r}")


def fusion_width(strategy: str, d: int) -> int:
    return 3 * d if strategy in ("concat", "all_with_fc") else d


def fuse(reps: list[Tensor], hc: Tensor, strategy: str, W: Param, b: Param) -> Tensor:
    """``ReLU(W . reduce(H_suc, H_rec, H_coc) + b + hc)``."""
    h = reduce_clusters(reps, strategy)
    if h.shape[-1] != W.shape[1]:
        raise ValueError(
            f"fusion strategy {strategy!r} yields width {h.shape[-1]}, weight expects {W.shape[1]}"
        )
    return nc.relu(nc.linear(h, W, b) + hc)


class SenHead:
    """Clustered attention with three batch norms and a fusion layer."""

    kind = "sen"

    def __init__(self, name, rng, claim_in, evidence_in, d, fusion="concat"):
        if fusion not in FUSION_STRATEGIES:
            raise ValueError(f"unknown fusion strategy {fusion!r}")
        self.name, self.d, self.fusion = name, d, fusion
        self.proj = Projections.create(name, rng, claim_in, evidence_in, d)
        self.bn = {c: BatchNormState.create(f"{name}.bn_{c}", d) for c in CLUSTERS}
        self.W = Param(f"{name}.W", nc.glorot(rng, d, fusion_width(fusion, d)))
        self.b = Param(f"{name}.b", np.zeros(d))

    def params(self) -> list[Param]:
        out = self.proj.params()
        for c in CLUSTERS:
            out += self.bn[c].params()
        return out + [self.W, self.b]

    def bn_states(self) -> dict[str, BatchNormState]:
        return {f"{self.name}.bn_{c}": self.bn[c] for c in CLUSTERS}

    def forward(self, claim, evidence, masks: dict, train: bool):
        hc = project_claim(claim, self.proj)
        keys, values = project_evidence(evidence, self.proj)
        reps, weights = [], {}
        for c in CLUSTERS:
            rep, alpha = cluster_attention(hc, keys, values, masks[c], self.bn[c], train)
            reps.append(rep)
            weights[c] = alpha.data
        return fuse(reps, hc, self.fusion, self.W, self.b), weights


class MemoryHead:
    """Single attention over all evidence, no clustering and no fusion layer."""

    kind = "memory"

    def __init__(self, name, rng, claim_in, evidence_in, d):
        self.name, self.d = name, d
        self.proj = Projections.create(name, rng, claim_in, evidence_in, d)
        self.bn_all = BatchNormState.create(f"{name}.bn_all", d)

    def params(self) -> list[Param]:
        return self.proj.params() + self.bn_all.params()

    def bn_states(self) -> dict[str, BatchNormState]:
        return {f"{self.name}.bn_all": self.bn_all}

    def forward(self, claim, evidence, masks: dict, train: bool):
        hc = project_claim(claim, self.proj)
        keys, values = project_evidence(evidence, self.proj)
        rep, alpha = cluster_attention(hc, keys, values, masks["all"], self.bn_all, train)
        return rep, {"all": alpha.data}


def memory_forward(claim, evidence, mask, head: MemoryHead, train: bool = False):
    return head.forward(claim, evidence, {"all": mask}, train)


class SignedHead:
    """Positive and negated-softmax attention, concatenated and projected."""

    kind = "signed"

    def __init__(self, name, rng, claim_in, evidence_in, d):
        self.name, self.d = name, d
        self.proj = Projections.create(name, rng, claim_in, evidence_in, d)
        self.W = Param(f"{name}.W", nc.glorot(rng, d, 2 * d))
        self.b = Param(f"{name}.b", np.zeros(d))

    def params(self) -> list[Param]:
        return self.proj.params() + [self.W, self.b]

    def bn_states(self) -> dict:
        return {}

    def forward(self, claim, evidence, masks: dict, train: bool):
        hc = project_claim(claim, self.proj)
        keys, values = project_evidence(evidence, self.proj)
        return signed_attention_forward(hc, keys, values, masks["all"], self.W, self.b)


def signed_attention_forward(hc, keys, values, mask, W, b):
    a_pos = attention_weights(hc, keys, mask)
    a_neg = attention_weights(hc, keys, mask, sign=-1.0)
    h_pos = pool(a_pos, values) + hc
    h_neg = -pool(a_neg, values) + hc
    out = nc.linear(nc.concat([h_pos, h_neg], axis=-1), W, b)
    return out, {"positive": a_pos.data, "negative": a_neg.data}


class ArithHead:
    """Product and difference between projected pooled evidence and claim."""

    kind = "arith"

    def __init__(self, name, rng, claim_in, evidence_in, d):
        self.name, self.d = name, d
        self.proj = Projections.create(name, rng, claim_in, evidence_in, d)
        self.Ws = Param(f"{name}.Ws", nc.glorot(rng, d, d))
        self.W = Param(f"{name}.W", nc.glorot(rng, d, 2 * d))
        self.b = Param(f"{name}.b", np.zeros(d))

    def params(self) -> list[Param]:
        return self.proj.params() + [self.Ws, self.W, self.b]

    def bn_states(self) -> dict:
        return {}

    def forward(self, claim, evidence, masks: dict, train: bool):
        hc = project_claim(claim, self.proj)
        keys, values = project_evidence(evidence, self.proj)
        alpha = attention_weights(hc, keys, masks["all"])
        return stance_arith_forward(hc, pool(alpha, values), self.Ws, self.W, self.b), {
            "all": alpha.data
        }


def stance_arith_forward(hc, pooled, Ws, W, b):
    proj = nc.linear(pooled, Ws)
    h = nc.concat([proj * hc, proj - hc], axis=-1)
    return nc.linear(h, W, b)


HEADS = {"sen": SenHead, "memory": MemoryHead, "signed": SignedHead, "arith": ArithHead}
