"""Density-based phrase clustering with an explicit noise cluster.

Points are (phrase, vector) occurrences; identical phrases repeated across
reviews contribute one point each. A point whose core distance exceeds the
distance threshold is noise, as is any connected component of the bounded
mutual-reachability graph that is smaller than the minimum cluster size.
Cluster ids are dense nonnegative integers assigned by first occurrence;
id -1 is reserved for the noise cluster.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .embedstore import cluster_score
from .ingest import rule_lemma

__all__ = [
    "NOISE_ID",
    "PhraseCluster",
    "EmptyInput",
    "NoiseClusterUnlabeled",
    "cluster",
    "label_cluster",
    "merge_similar",
    "default_stopwords",
    "load_stopwords",
]

NOISE_ID = -1

_TOKEN_RE = re.compile(r"[A-Za-z0-9']+")


class EmptyInput(ValueError):
    """No points to cluster."""


class NoiseClusterUnlabeled(ValueError):
    """The noise cluster never receives a label."""


@dataclass
class PhraseCluster:
    """A cluster of descriptor or relation phrases with their vectors."""

    id: int
    members: list[tuple[str, np.ndarray]]
    label: str = ""
    non_sequenceable: bool = False

    @property
    def is_noise(self) -> bool:
        return self.id == NOISE_ID

    @property
    def phrases(self) -> list[str]:
        return [p for p, _ in self.members]

    def matrix(self) -> np.ndarray:
        return np.vstack([v for _, v in self.members])


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    data = resources.files("storynet.data").joinpath("stopwords.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in data.splitlines() if w.strip())


def load_stopwords(path: str | Path) -> frozenset[str]:
    return frozenset(
        w.strip().lower() for w in Path(path).read_text(encoding="utf-8").splitlines() if w.strip()
    )


def cluster(
    points: Sequence[tuple[str, np.ndarray]],
    min_cluster_size: int = 3,
    distance_threshold: float = 2.0,
) -> list[PhraseCluster]:
    """Partition points into density clusters plus one noise cluster.

    Core distance of a point is the Euclidean distance to its
    min_cluster_size-th nearest neighbour, counting the point itself.
    Non-noise clusters are the connected components of the graph joining
    pairs whose mutual-reachability distance (max of the two core distances
    and the pairwise distance) stays within the threshold; components below
    the minimum size fall back to noise. Output is deterministic in the
    input order.
    """
    if not points:
        raise EmptyInput("no points to cluster")
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be at least 2")
    if distance_threshold <= 0:
        raise ValueError("distance_threshold must be positive")

    n = len(points)
    x = np.vstack([np.asarray(v, dtype=float) for _, v in points])
    sq = np.sum(x * x, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
    dist = np.sqrt(d2)

    k = min(min_cluster_size, n)
    core = np.sort(dist, axis=1)[:, k - 1]
    dense = core <= distance_threshold

    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    dense_idx = np.nonzero(dense)[0]
    for ai in range(len(dense_idx)):
        for bi in range(ai + 1, len(dense_idx)):
            a, b = int(dense_idx[ai]), int(dense_idx[bi])
            mreach = max(core[a], core[b], dist[a, b])
            if mreach <= distance_threshold:
                union(a, b)

    groups: dict[int, list[int]] = {}
    for i in map(int, dense_idx):
        groups.setdefault(find(i), []).append(i)

    clusters: list[PhraseCluster] = []
    noise_members: list[tuple[int, tuple[str, np.ndarray]]] = []
    next_id = 0
    assigned: set[int] = set()
    for i in range(n):
        if not dense[i] or i in assigned:
            continue
        members = groups.get(find(i), [])
        if len(members) < min_cluster_size:
            continue
        clusters.append(PhraseCluster(id=next_id, members=[points[j] for j in members]))
        next_id += 1
        assigned.update(members)
    for i in range(n):
        if i not in assigned:
            noise_members.append((i, points[i]))
    clusters.append(PhraseCluster(id=NOISE_ID, members=[m for _, m in noise_members]))
    return clusters


def label_cluster(c: PhraseCluster, stopwords: frozenset[str] | None = None) -> str:
    """Label a cluster with its two most frequent content tokens.

    Tokens are lowercased and reduced with the rule lemmatizer before
    counting; stop words are excluded. Frequency ties go to the token seen
    first in the member phrases, and a cluster with a single distinct token
    is labeled by that token alone. A cluster made entirely of stop words
    falls back to counting its raw tokens so the label is never empty.
    """
    if c.is_noise:
        raise NoiseClusterUnlabeled("the noise cluster has no label")
    stopwords = stopwords if stopwords is not None else default_stopwords()
    ranked = _ranked_tokens(c, stopwords)
    if not ranked:
        ranked = _ranked_tokens(c, frozenset())
    return ",".join(ranked[:2])


def _ranked_tokens(c: PhraseCluster, stopwords: frozenset[str]) -> list[str]:
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    position = 0
    for phrase, _ in c.members:
        for token in _TOKEN_RE.findall(phrase.lower()):
            if token in stopwords:
                position += 1
                continue
            lemma = rule_lemma(token)
            if lemma in stopwords:
                position += 1
                continue
            counts[lemma] = counts.get(lemma, 0) + 1
            first_seen.setdefault(lemma, position)
            position += 1
    return sorted(counts, key=lambda t: (-counts[t], first_seen[t]))


def merge_similar(
    clusters: Sequence[PhraseCluster],
    merge_threshold: float = 1.6,
    stopwords: frozenset[str] | None = None,
) -> list[PhraseCluster]:
    """Union clusters whose pairwise similarity score reaches the threshold.

    Similarity is the two-sided best-match cosine score in [-2, 2]; merging
    is closed transitively and labels are recomputed afterwards. The noise
    cluster never participates.
    """
    real = [c for c in clusters if not c.is_noise]
    noise = [c for c in clusters if c.is_noise]
    if len(real) <= 1:
        return list(clusters)

    parent = list(range(len(real)))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    matrices = [c.matrix() for c in real]
    for i in range(len(real)):
        for j in range(i + 1, len(real)):
            if cluster_score(matrices[i], matrices[j]) >= merge_threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    merged: dict[int, PhraseCluster] = {}
    next_id = 0
    for i, c in enumerate(real):
        root = find(i)
        if root not in merged:
            merged[root] = PhraseCluster(id=next_id, members=list(c.members),
                                         non_sequenceable=c.non_sequenceable)
            next_id += 1
        else:
            merged[root].members.extend(c.members)
            merged[root].non_sequenceable = merged[root].non_sequenceable or c.non_sequenceable
    out = list(merged.values())
    for c in out:
        c.label = label_cluster(c, stopwords)
    return out + noise
