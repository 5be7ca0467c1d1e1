"""Character impression mixtures, similarity heatmaps and complexity.

Copular descriptor phrases are grouped per character, clustered in
embedding space and filtered by a score-distribution test. Cluster pairs
are compared by a two-sided best-match cosine score after a joint PCA;
the symmetric self-heatmap of a character feeds an entropy measure of
how spread out readers' impressions are.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import leaves_list, linkage
from scipy.spatial.distance import squareform

from . import denscluster
from .actants import MentionMap
from .denscluster import PhraseCluster
from .embedstore import EmbeddingTable, MissingEmbedding, cluster_score, pca_project
from .ingest import ReviewCorpus, TupleKind

__all__ = [
    "ImpressionMixture",
    "Heatmap",
    "EmptyCluster",
    "DegenerateVariance",
    "TooFewClusters",
    "AsymmetricInput",
    "select_svcop",
    "word_scores",
    "skewness",
    "filter_clusters",
    "cluster_pair_similarity",
    "build_mixture",
    "mixture_heatmap",
    "character_entropy",
]

_WORD_RE = re.compile(r"[A-Za-z0-9']+")


class EmptyCluster(ValueError):
    """An operation received a cluster without members."""


class DegenerateVariance(ValueError):
    """Skewness is undefined when all samples are equal."""


class TooFewClusters(ValueError):
    """Heatmap/entropy operations need at least four impression clusters."""


class AsymmetricInput(ValueError):
    """A symmetric heatmap was expected."""


@dataclass
class ImpressionMixture:
    """A character's filtered impression clusters plus the noise remainder."""

    character: str
    clusters: list[PhraseCluster]
    noise: PhraseCluster | None = None

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)


@dataclass
class Heatmap:
    row_labels: list[str]
    col_labels: list[str]
    values: np.ndarray

    @property
    def is_symmetric(self) -> bool:
        return (self.values.shape[0] == self.values.shape[1]
                and float(np.max(np.abs(self.values - self.values.T))) < 1e-9)


def select_svcop(corpus: ReviewCorpus, mention_map: MentionMap) -> dict[str, list[str]]:
    """Descriptor phrases per character, from copular tuples whose subject resolves."""
    out: dict[str, list[str]] = {}
    for t in corpus:
        if t.kind is not TupleKind.SVCOP:
            continue
        character = mention_map.resolve(t.subject_head)
        if character is None:
            continue
        out.setdefault(character, []).append(t.object_text.strip())
    return out


def word_scores(
    c: PhraseCluster,
    corpus: ReviewCorpus,
    stopwords: frozenset[str] | None = None,
) -> dict[str, float]:
    """Corpus-weighted word scores for a cluster's phrases.

    A word scores TF-IDF times its in-cluster frequency, where TF is the
    word's share of all corpus tokens and IDF is ln(N_docs / (1 + docs
    containing the word)), each review being one document. Stop words are
    removed before scoring; a word absent from the corpus scores 0.
    """
    if not c.members:
        raise EmptyCluster("cannot score an empty cluster")
    stopwords = stopwords if stopwords is not None else denscluster.default_stopwords()

    cluster_freq: dict[str, int] = {}
    for phrase, _ in c.members:
        for token in _WORD_RE.findall(phrase.lower()):
            if token not in stopwords:
                cluster_freq[token] = cluster_freq.get(token, 0) + 1

    docs = [
        [w for w in _WORD_RE.findall(text.lower())]
        for text in corpus.raw_texts.values()
    ]
    n_docs = len(docs)
    total_tokens = sum(len(d) for d in docs)
    corpus_freq: dict[str, int] = {}
    doc_freq: dict[str, int] = {}
    for doc in docs:
        seen = set()
        for w in doc:
            corpus_freq[w] = corpus_freq.get(w, 0) + 1
            if w not in seen:
                doc_freq[w] = doc_freq.get(w, 0) + 1
                seen.add(w)

    scores: dict[str, float] = {}
    for word, f_cluster in cluster_freq.items():
        if total_tokens == 0 or corpus_freq.get(word, 0) == 0:
            scores[word] = 0.0
            continue
        tf = corpus_freq[word] / total_tokens
        idf = math.log(n_docs / (1 + doc_freq.get(word, 0)))
        scores[word] = tf * idf * f_cluster
    return scores


def skewness(samples: Sequence[float]) -> float:
    """Biased sample skewness m3 / m2^(3/2)."""
    x = np.asarray(list(samples), dtype=float)
    if x.size < 3:
        raise ValueError("skewness needs at least 3 samples")
    mean = x.mean()
    dev = x - mean
    m2 = float(np.mean(dev ** 2))
    if m2 == 0.0:
        raise DegenerateVariance("all samples are equal")
    m3 = float(np.mean(dev ** 3))
    return m3 / m2 ** 1.5


def filter_clusters(
    character: str,
    clusters: Sequence[PhraseCluster],
    corpus: ReviewCorpus,
    tau_skew: float = 1.0,
    tau_mean: float | None = None,
    tau_var: float | None = None,
    stopwords: frozenset[str] | None = None,
) -> ImpressionMixture:
    """Keep clusters with skewed score tails or high flat score profiles.

    A cluster passes when its word-score skewness exceeds tau_skew, or when
    the scores have a high mean (above tau_mean) with low variance (below
    tau_var); zero-variance clusters always satisfy the variance side. The
    default tau_mean is the 75th percentile of the character's word scores
    and the default tau_var the median of its per-cluster score variances.
    """
    real = [c for c in clusters if not c.is_noise]
    noise = next((c for c in clusters if c.is_noise), None)
    per_cluster_scores = [list(word_scores(c, corpus, stopwords).values()) for c in real]

    if tau_mean is None:
        pooled = [s for scores in per_cluster_scores for s in scores]
        tau_mean = float(np.percentile(pooled, 75)) if pooled else 0.0
    if tau_var is None:
        variances = [float(np.var(s)) for s in per_cluster_scores if s]
        tau_var = float(np.median(variances)) if variances else 0.0

    kept: list[PhraseCluster] = []
    for c, scores in zip(real, per_cluster_scores):
        if not scores:
            continue
        arr = np.asarray(scores, dtype=float)
        var = float(np.var(arr))
        skew_ok = False
        if arr.size >= 3 and var > 0:
            skew_ok = skewness(arr) > tau_skew
        flat_ok = float(arr.mean()) > tau_mean and (var == 0.0 or var < tau_var)
        if skew_ok or flat_ok:
            kept.append(c)
    return ImpressionMixture(character=character, clusters=kept, noise=noise)


def cluster_pair_similarity(left: PhraseCluster | np.ndarray, right: PhraseCluster | np.ndarray) -> float:
    """Two-sided mean best-match cosine score in [-2, 2] between clusters."""

    def as_matrix(c):
        if isinstance(c, PhraseCluster):
            if not c.members:
                raise EmptyCluster("similarity of an empty cluster is undefined")
            return c.matrix()
        m = np.atleast_2d(c)
        if m.size == 0:
            raise EmptyCluster("similarity of an empty cluster is undefined")
        return m

    return cluster_score(as_matrix(left), as_matrix(right))


def build_mixture(
    character: str,
    descriptors: Sequence[str],
    table: EmbeddingTable,
    corpus: ReviewCorpus,
    *,
    min_cluster_size: int = 3,
    eps: float = 2.0,
    merge_threshold: float = 1.6,
    tau_skew: float = 1.0,
    tau_mean: float | None = None,
    tau_var: float | None = None,
    stopwords: frozenset[str] | None = None,
) -> ImpressionMixture:
    """Cluster, merge, label and filter one character's descriptor phrases."""
    points = [(phrase, table.lookup(phrase)) for phrase in descriptors]
    if not points:
        return ImpressionMixture(character=character, clusters=[], noise=None)
    clusters = denscluster.cluster(points, min_cluster_size=min_cluster_size,
                                   distance_threshold=eps)
    for c in clusters:
        if not c.is_noise:
            c.label = denscluster.label_cluster(c, stopwords)
    clusters = denscluster.merge_similar(clusters, merge_threshold, stopwords)
    return filter_clusters(character, clusters, corpus, tau_skew=tau_skew,
                           tau_mean=tau_mean, tau_var=tau_var, stopwords=stopwords)


def _dendrogram_order(self_scores: np.ndarray, labels: Sequence[str]) -> list[int]:
    """Leaf order of an average-linkage dendrogram over (2 - score) distances."""
    n = self_scores.shape[0]
    if n <= 2:
        return list(range(n))
    dist = 2.0 - self_scores
    np.fill_diagonal(dist, 0.0)
    dist = np.maximum((dist + dist.T) / 2.0, 0.0)
    condensed = squareform(dist, checks=False)
    return [int(i) for i in leaves_list(linkage(condensed, method="average"))]


def mixture_heatmap(
    a: ImpressionMixture,
    b: ImpressionMixture,
    table: EmbeddingTable,
    components: int = 4,
) -> Heatmap:
    """Pairwise cluster similarity between two mixtures after a joint PCA.

    All member phrases of both mixtures are embedded and projected with a
    single PCA fit to `components` dimensions (clamped to the number of
    pooled vectors); every cluster pair is then scored. Comparing a mixture
    with itself yields a symmetric heatmap with an exact +2 diagonal. Rows
    and columns follow dendrogram leaf order over each mixture's internal
    similarity, ties resolved by label order.
    """
    if not a.clusters or not b.clusters:
        raise TooFewClusters("both mixtures need at least one cluster")

    a_sorted = sorted(a.clusters, key=lambda c: (c.label, c.id))
    same = a.character == b.character and [c.id for c in a.clusters] == [c.id for c in b.clusters]
    b_sorted = a_sorted if same else sorted(b.clusters, key=lambda c: (c.label, c.id))

    def embedded(c: PhraseCluster) -> tuple[list[str], np.ndarray]:
        phrases = c.phrases
        return phrases, np.vstack([table.lookup(p) for p in phrases])

    sets = [embedded(c) for c in a_sorted]
    offset = len(sets)
    if not same:
        sets += [embedded(c) for c in b_sorted]
    pooled = sum(m.shape[0] for _, m in sets)
    k = min(components, pooled, sets[0][1].shape[1])
    projected = pca_project(sets, k)
    a_proj = [p.vectors for p in projected[:offset]]
    b_proj = a_proj if same else [p.vectors for p in projected[offset:]]

    values = np.zeros((len(a_sorted), len(b_sorted)))
    for i, left in enumerate(a_proj):
        for j, right in enumerate(b_proj):
            values[i, j] = cluster_score(left, right)

    if same:
        order = _dendrogram_order(values, [c.label for c in a_sorted])
        a_order = b_order = order
    else:
        a_self = np.zeros((len(a_proj), len(a_proj)))
        for i, left in enumerate(a_proj):
            for j in range(i, len(a_proj)):
                a_self[i, j] = a_self[j, i] = cluster_score(left, a_proj[j])
        b_self = np.zeros((len(b_proj), len(b_proj)))
        for i, left in enumerate(b_proj):
            for j in range(i, len(b_proj)):
                b_self[i, j] = b_self[j, i] = cluster_score(left, b_proj[j])
        a_order = _dendrogram_order(a_self, [c.label for c in a_sorted])
        b_order = _dendrogram_order(b_self, [c.label for c in b_sorted])

    values = values[np.ix_(a_order, b_order)]
    return Heatmap(
        row_labels=[a_sorted[i].label for i in a_order],
        col_labels=[b_sorted[j].label for j in b_order],
        values=values,
    )


def character_entropy(h: Heatmap, bins: int = 50, kernel_width: int = 3) -> float:
    """Entropy of the smoothed histogram of sub-diagonal similarity values.

    The strictly-below-diagonal entries of a symmetric heatmap are binned
    over [-2, 2], smoothed with a uniform kernel of the given width in bins
    (truncated and renormalized at the edges), normalized to a probability
    distribution and reduced to natural-log entropy in [0, ln(bins)].
    """
    values = h.values
    if values.shape[0] != values.shape[1] or not h.is_symmetric:
        raise AsymmetricInput("entropy needs a symmetric single-character heatmap")
    if values.shape[0] < 4:
        raise TooFewClusters("entropy needs at least 4 impression clusters")
    if bins < 1 or kernel_width < 1:
        raise ValueError("bins and kernel width must be positive")

    lower = values[np.tril_indices_from(values, k=-1)]
    hist, _ = np.histogram(lower, bins=bins, range=(-2.0, 2.0))
    hist = hist.astype(float)

    left = (kernel_width - 1) // 2
    right = kernel_width // 2
    smoothed = np.empty(bins)
    for i in range(bins):
        lo = max(0, i - left)
        hi = min(bins, i + right + 1)
        smoothed[i] = hist[lo:hi].sum() / (hi - lo)

    total = smoothed.sum()
    if total == 0:
        return 0.0
    p = smoothed / total
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())
