"""Support-refutation score (SRS) from named-entity co-occurrence.

For evidence document ``i`` against caption entities ``E_c``::

    SRS_i = #shared - sum(g(rank_j) for conflicting j with count_j >= tau) / zeta

where ``shared`` are the evidence entities fuzzy-matching the caption,
conflicting entities are the rest, ``rank_j`` is the 1-based position of
``j`` in the frequency-ranked index over all evidence of the claim and
``tau = min(tau_cap, #distinct indexed entities)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

from .entitymatch import (
    EntitySet,
    RankedEntityIndex,
    build_frequency_index,
    fuzzy_difference,
    fuzzy_intersection,
)

ZETA_MODES = ("binarization", "proportion")
VARIANTS = (
    "full",
    "positive_only",
    "negative_fixed_one",
    "g_fixed_half",
    "zeta_fixed_two",
    "binary_nei",
)


@dataclass(frozen=True)
class SrsConfig:
    """SRS hyperparameters.

    ``zeta_scale`` is beta in binarization mode and alpha in proportion mode.
    ``g_a``/``g_b`` parametrize ``g(x) = 1 / (a + exp(x ** (1/b)))``.
    """

    tau_cap: int = 2
    zeta_mode: str = "binarization"
    zeta_scale: float = 1.0
    g_a: float = 0.0
    g_b: int = 2
    variant: str = "full"

    def __post_init__(self):
        if self.zeta_mode not in ZETA_MODES:
            raise ValueError(f"zeta_mode must be one of {ZETA_MODES}, got {self.zeta_mode!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.zeta_scale > 0:
            raise ValueError("zeta_scale must be > 0")
        if self.tau_cap < 1:
            raise ValueError("tau_cap must be >= 1")
        if self.g_a < 0 or self.g_b < 1 or int(self.g_b) != self.g_b:
            raise ValueError("g requires a >= 0 and integer b >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SrsConfig":
        return cls(**d)


@dataclass(frozen=True)
class ConflictTerm:
    entity: str
    rank: int
    weight: float


@dataclass(frozen=True)
class SrsScore:
    value: float
    shared_count: int
    conflict_terms: tuple[ConflictTerm, ...] = field(default=())
    # numerator actually subtracted (differs from sum(weights) for some variants)
    penalty: float = 0.0
    zeta: float = 1.0


def g_weight(rank: int, a: float = 0.0, b: int = 2) -> float:
    if rank < 1:
        raise ValueError("rank must be >= 1")
    return 1.0 / (a + math.exp(rank ** (1.0 / b)))


def zeta(shared_count: int, mode: str = "binarization", scale: float = 1.0) -> float:
    if mode == "proportion":
        return scale * (shared_count + 1)
    if mode == "binarization":
        return 2.0 * scale if shared_count >= 1 else scale
    raise ValueError(f"unknown zeta mode {mode!r}")


def tau_for(index: RankedEntityIndex, cap: int = 2) -> int:
    # never below 1, so an empty index still yields a usable threshold
    return max(1, min(cap, len(index)))


def srs_score(
    evidence: EntitySet,
    caption: EntitySet,
    index: RankedEntityIndex,
    config: SrsConfig = SrsConfig(),
) -> SrsScore:
    if not evidence:
        return SrsScore(0.0, 0)
    shared = fuzzy_intersection(evidence, caption)
    n_shared = len(shared)
    if config.variant == "binary_nei":
        return SrsScore(1.0 if n_shared else 0.0, n_shared)

    conflicts = fuzzy_difference(evidence, caption)
    tau = tau_for(index, config.tau_cap)
    terms = []
    seen = set()
    for ent in conflicts:
        entry = index.lookup(ent)
        if entry is None or entry.count < tau or entry.entity in seen:
            continue
        seen.add(entry.entity)
        if config.variant == "g_fixed_half":
            w = 0.5
        else:
            w = g_weight(entry.rank, config.g_a, config.g_b)
        terms.append(ConflictTerm(entry.entity, entry.rank, w))

    if config.variant == "positive_only":
        penalty = 0.0
    elif config.variant == "negative_fixed_one":
        penalty = 1.0 if conflicts else 0.0
    else:
        penalty = math.fsum(t.weight for t in terms)

    if config.variant == "zeta_fixed_two":
        z = 2.0
    else:
        z = zeta(n_shared, config.zeta_mode, config.zeta_scale)
    return SrsScore(n_shared - penalty / z, n_shared, tuple(terms), penalty, z)


def srs_vector(
    evidence_docs: Sequence[EntitySet],
    caption: EntitySet,
    config: SrsConfig = SrsConfig(),
) -> list[float]:
    """Score every document against one index built over all of them."""
    if not evidence_docs:
        return []
    index = build_frequency_index(evidence_docs)
    return [srs_score(doc, caption, index, config).value for doc in evidence_docs]
