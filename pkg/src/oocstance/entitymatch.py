"""Named-entity normalization, fuzzy equality and frequency ranking.

Entities are compared after normalization; two strings are considered the
same entity when they are equal, when one is a token subset of the other
(sharing a token of at least three characters), or when their normalized
Levenshtein similarity reaches ``MATCH_THRESHOLD``.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from rapidfuzz.distance import Levenshtein

MATCH_THRESHOLD = 0.8
MIN_SHARED_TOKEN = 3

_WS = re.compile(r"\s+")
_POSSESSIVE = ("'s", "’s")


def _is_edge_char(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch)[0] in "PS"


def _strip_edges(s: str) -> str:
    start, end = 0, len(s)
    while start < end and _is_edge_char(s[start]):
        start += 1
    while end > start and _is_edge_char(s[end - 1]):
        end -= 1
    return s[start:end]


def _normalize_once(s: str) -> str:
    s = _WS.sub(" ", s.casefold())
    s = _strip_edges(s)
    for marker in _POSSESSIVE:
        if s.endswith(marker):
            s = _strip_edges(s[: -len(marker)])
            break
    return s


def normalize_entity(raw: str) -> str:
    """Case-fold, trim punctuation and drop a trailing possessive.

    Returns ``""`` for input made only of punctuation/whitespace.

    >>> normalize_entity("Obama's")
    'obama'
    >>> normalize_entity("  Barack   Obama ")
    'barack obama'
    """
    s = raw
    while True:
        nxt = _normalize_once(s)
        if nxt == s:
            return s
        s = nxt


def similarity(a: str, b: str) -> float:
    """``1 - lev(a, b) / max(len(a), len(b))``; 0.0 when either is empty."""
    if not a or not b:
        return 0.0
    return 1.0 - Levenshtein.distance(a, b) / max(len(a), len(b))


def _token_subset(a: str, b: str) -> bool:
    ta, tb = set(a.split(" ")), set(b.split(" "))
    small, large = (ta, tb) if len(ta) <= len(tb) else (tb, ta)
    if not small <= large:
        return False
    return any(len(t) >= MIN_SHARED_TOKEN for t in small)


def entities_match(a: str, b: str) -> bool:
    """Fuzzy equality of two normalized entity strings (symmetric)."""
    if not a or not b:
        return False
    if a == b:
        return True
    if _token_subset(a, b):
        return True
    return similarity(a, b) >= MATCH_THRESHOLD


@dataclass(frozen=True)
class EntitySet:
    """Normalized entities, fuzzy-deduplicated, first-occurrence order."""

    entities: tuple[str, ...] = ()

    @classmethod
    def from_raw(cls, raw: Iterable[str]) -> "EntitySet":
        out: list[str] = []
        for r in raw:
            e = normalize_entity(r)
            if e and not any(entities_match(e, o) for o in out):
                out.append(e)
        return cls(tuple(out))

    def __iter__(self):
        return iter(self.entities)

    def __len__(self) -> int:
        return len(self.entities)

    def __bool__(self) -> bool:
        return bool(self.entities)


@dataclass(frozen=True)
class IndexEntry:
    entity: str
    count: int
    rank: int


@dataclass
class RankedEntityIndex:
    """Entities ranked by document frequency (descending, stable ties).

    ``canonicals`` keeps the canonical forms in first-seen order; lookups
    resolve an entity to the first canonical form it fuzzy-matches, which is
    the same rule used when the index was built.
    """

    entries: list[IndexEntry] = field(default_factory=list)
    canonicals: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def resolve(self, entity: str) -> str | None:
        for c in self.canonicals:
            if entities_match(entity, c):
                return c
        return None

    def lookup(self, entity: str) -> IndexEntry | None:
        c = self.resolve(entity)
        if c is None:
            return None
        return self._by_entity[c]

    def __post_init__(self):
        self._by_entity = {e.entity: e for e in self.entries}


def build_frequency_index(evidence_sets: Sequence[EntitySet]) -> RankedEntityIndex:
    """Count, per canonical entity, how many documents mention it."""
    canonicals: list[str] = []
    counts: dict[str, int] = {}
    for doc in evidence_sets:
        seen: set[str] = set()
        for ent in doc:
            canon = next((c for c in canonicals if entities_match(ent, c)), None)
            if canon is None:
                canon = ent
                canonicals.append(ent)
                counts[ent] = 0
            if canon not in seen:
                seen.add(canon)
                counts[canon] += 1
    # sorted() is stable, so equal counts keep first-seen order
    ordered = sorted(canonicals, key=lambda c: -counts[c])
    entries = [IndexEntry(c, counts[c], r) for r, c in enumerate(ordered, start=1)]
    return RankedEntityIndex(entries, canonicals)


def fuzzy_intersection(evidence: EntitySet, caption: EntitySet) -> EntitySet:
    return EntitySet(tuple(e for e in evidence if any(entities_match(e, c) for c in caption)))


def fuzzy_difference(evidence: EntitySet, caption: EntitySet) -> EntitySet:
    return EntitySet(tuple(e for e in evidence if not any(entities_match(e, c) for c in caption)))


_CAP_RUN = re.compile(r"(?:[A-Z][\w'’.-]*)(?:\s+[A-Z][\w'’.-]*)*")


def extract_entities(text: str) -> EntitySet:
    """Crude capitalized-run extractor, for demos only (not real NER).

    Sentence-initial single words are skipped since capitalization there
    carries no signal.
    """
    found = []
    for m in _CAP_RUN.finditer(text):
        span = m.group(0)
        start = m.start()
        prefix = text[:start].rstrip()
        sentence_start = not prefix or prefix[-1] in ".!?"
        if sentence_start and " " not in span:
            continue
        found.append(span)
    return EntitySet.from_raw(found)
