"""Average-linkage cosine clustering and SuC/ReC/CoC assignment.

Given a claim vector and its evidence vectors:

* SuC: evidence sharing the claim's cluster at threshold ``tau_s``;
* ReC: the cluster with the most evidence members at threshold ``tau_r``
  (ties go to the cluster whose evidence centroid is closest to the claim);
* CoC: all remaining evidence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

TEXT_THRESHOLD = 0.500
IMAGE_THRESHOLD = 0.166


@dataclass(frozen=True)
class ClusterAssignment:
    suc: frozenset[int]
    rec: frozenset[int]
    coc: frozenset[int]

    def members(self, name: str) -> frozenset[int]:
        return getattr(self, name.lower())

    def to_dict(self) -> dict:
        return {k: sorted(getattr(self, k)) for k in ("suc", "rec", "coc")}


def cosine_distance(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine distance undefined for a zero vector")
    return float(1.0 - np.dot(u, v) / (nu * nv))


def cosine_distance_matrix(points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        raise ValueError("cosine distance undefined for a zero vector")
    unit = x / norms[:, None]
    d = 1.0 - unit @ unit.T
    np.fill_diagonal(d, 0.0)
    return np.clip(d, 0.0, 2.0)


def agglomerate(points: Sequence, threshold: float) -> list[list[int]]:
    """Average-linkage agglomerative clustering, cut at ``threshold``.

    Merges the closest pair of clusters while their average pairwise cosine
    distance is <= ``threshold``. Equal distances are resolved by the pair
    with the smallest (min index, min index). Returns clusters as sorted
    index lists ordered by their smallest member.
    """
    n = len(points)
    if n == 0:
        return []
    dist = cosine_distance_matrix(points)
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}
    # linkage[a][b] for live cluster keys (key == min member index)
    link = {i: {j: dist[i, j] for j in range(n) if j != i} for i in range(n)}

    while len(clusters) > 1:
        best = None
        for a in sorted(clusters):
            for b, dab in link[a].items():
                if b <= a:
                    continue
                cand = (dab, a, b)
                if best is None or cand < best:
                    best = cand
        dab, a, b = best
        if dab > threshold:
            break
        na, nb = len(clusters[a]), len(clusters[b])
        merged = sorted(clusters[a] + clusters[b])
        del clusters[b]
        clusters[a] = merged
        for c in clusters:
            if c == a:
                continue
            dc = (na * link[a][c] + nb * link[b][c]) / (na + nb)
            link[a][c] = dc
            link[c][a] = dc
            del link[c][b]
        del link[b]
        del link[a][b]
    return [clusters[k] for k in sorted(clusters)]


def _centroid_distance(claim: np.ndarray, members: np.ndarray) -> float:
    centroid = members.mean(axis=0)
    if not np.any(centroid):
        # opposing members cancelled out; treat as orthogonal to the claim
        return 1.0
    return cosine_distance(claim, centroid)


def assign_clusters(
    claim,
    evidence: Sequence,
    tau_s: float = TEXT_THRESHOLD,
    tau_r: float = TEXT_THRESHOLD,
) -> ClusterAssignment:
    """Split evidence indices (0-based, claim excluded) into SuC/ReC/CoC."""
    if tau_s <= 0 or tau_r <= 0:
        raise ValueError("clustering thresholds must be > 0")
    if len(evidence) == 0:
        empty = frozenset()
        return ClusterAssignment(empty, empty, empty)
    claim = np.asarray(claim, dtype=np.float64)
    ev = np.asarray(evidence, dtype=np.float64)
    points = np.vstack([claim[None, :], ev])

    part_s = agglomerate(points, tau_s)
    part_r = part_s if tau_r == tau_s else agglomerate(points, tau_r)

    claim_cluster = next(c for c in part_s if 0 in c)
    suc = frozenset(i - 1 for i in claim_cluster if i != 0)

    best_key, rec = None, frozenset()
    for c in part_r:
        ev_members = [i - 1 for i in c if i != 0]
        if not ev_members:
            continue
        key = (-len(ev_members), _centroid_distance(claim, ev[ev_members]))
        if best_key is None or key < best_key:
            best_key, rec = key, frozenset(ev_members)

    coc = frozenset(range(len(ev))) - suc - rec
    return ClusterAssignment(suc, rec, coc)
