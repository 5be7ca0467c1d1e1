"""Mention grouping, per-pair relation clustering and event construction.

Mentions are grouped onto a seeded character census; relation phrases
between each ordered character pair are embedded, density-clustered,
merged and labeled; the labeled clusters define the event vocabulary
used by sequencing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import denscluster
from .denscluster import PhraseCluster
from .embedstore import EmbeddingTable, cosine
from .ingest import ReviewCorpus, RelationTuple, TupleKind, rule_lemma

__all__ = [
    "MentionMap",
    "RelationClusterSet",
    "Event",
    "EmptySeed",
    "DEFAULT_BLOCKLIST",
    "emg_resolve",
    "iarc",
    "iarc_all_pairs",
    "event_vocabulary",
    "build_event_sequences",
    "write_cluster_records",
    "read_cluster_records",
    "write_event_records",
    "read_event_records",
]

# Relationship wordings that describe wishes rather than plot events; clusters
# touching these words are kept in the graph but excluded from sequencing.
DEFAULT_BLOCKLIST = frozenset({"wish", "hope"})


class EmptySeed(ValueError):
    """The seed mention map lists no characters."""


@dataclass
class MentionMap:
    """Surjective mapping of case-folded mentions onto character ids."""

    mapping: dict[str, str]
    characters: dict[str, str]

    def __post_init__(self) -> None:
        if not self.characters:
            raise EmptySeed("no characters declared")
        mapped = set(self.mapping.values())
        missing = mapped - set(self.characters)
        if missing:
            raise ValueError(f"mentions map to undeclared characters: {sorted(missing)}")
        unreached = set(self.characters) - mapped
        if unreached:
            raise ValueError(f"characters without any mention: {sorted(unreached)}")

    def resolve(self, mention: str) -> str | None:
        return self.mapping.get(mention.casefold())

    def with_mention(self, mention: str, character: str) -> "MentionMap":
        mapping = dict(self.mapping)
        mapping[mention.casefold()] = character
        return MentionMap(mapping=mapping, characters=dict(self.characters))

    @classmethod
    def load(cls, path: str | Path) -> "MentionMap":
        """Read a line-delimited (mention, character-id, display-name) file."""
        mapping: dict[str, str] = {}
        characters: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                raw = raw.rstrip("\n")
                if not raw or raw.startswith("#"):
                    continue
                parts = raw.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{line_no}: expected 3 tab-separated fields")
                mention, char_id, display = parts
                mapping[mention.strip().casefold()] = char_id.strip()
                characters.setdefault(char_id.strip(), display.strip())
        if not characters:
            raise EmptySeed(f"{path}: no characters declared")
        return cls(mapping=mapping, characters=characters)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for mention in sorted(self.mapping):
                char_id = self.mapping[mention]
                fh.write(f"{mention}\t{char_id}\t{self.characters[char_id]}\n")


@dataclass
class RelationClusterSet:
    """Labeled relation clusters for one ordered character pair."""

    pair: tuple[str, str]
    clusters: list[PhraseCluster]
    labels: frozenset[str]

    def sequenceable_clusters(self) -> list[PhraseCluster]:
        return [c for c in self.clusters if not c.is_noise and not c.non_sequenceable]


@dataclass(frozen=True)
class Event:
    """An ordered (subject character, relation label, object character) triple."""

    subject: str
    relation_label: str
    object: str
    id: int

    @property
    def key(self) -> str:
        return f"{self.subject}|{self.relation_label}|{self.object}"


def _phrase_key(t: RelationTuple) -> str:
    return t.relation_text.strip()


def _lookup_vec(table: EmbeddingTable, t: RelationTuple) -> np.ndarray:
    return table.lookup(_phrase_key(t), fallback=t.relation_lemma)


def relational_tuples(corpus: ReviewCorpus) -> Iterable[RelationTuple]:
    """Tuples carrying inter-actant relations; copular descriptors are not
    mentions of a second actant and feed the impression pipeline instead."""
    return (t for t in corpus if t.kind is not TupleKind.SVCOP)


def _direction_profiles(corpus: ReviewCorpus, table: EmbeddingTable) -> dict[str, dict[str, list[np.ndarray]]]:
    """Per-mention mean ingredients: relation vectors split by direction."""
    out: dict[str, dict[str, list[np.ndarray]]] = {}
    for t in relational_tuples(corpus):
        vec = _lookup_vec(table, t)
        s = t.subject_head.casefold()
        o = t.object_head.casefold()
        out.setdefault(s, {"out": [], "in": []})["out"].append(vec)
        out.setdefault(o, {"out": [], "in": []})["in"].append(vec)
    return out


def emg_resolve(
    corpus: ReviewCorpus,
    seed_map: MentionMap,
    table: EmbeddingTable,
    sim_threshold: float = 0.85,
) -> MentionMap:
    """Attach unmapped mentions to characters by relation-context similarity.

    A mention's profile is the mean embedding of its relation phrases, kept
    separately for the subject and object directions. It joins the character
    whose profile is most similar when that similarity exceeds the threshold;
    seed entries are never overridden and mentions without relations stay
    unmapped, so the result remains surjective onto the seeded characters.
    """
    profiles = _direction_profiles(corpus, table)

    def mean_or_none(vecs: list[np.ndarray]) -> np.ndarray | None:
        return np.mean(vecs, axis=0) if vecs else None

    char_vecs: dict[str, dict[str, list[np.ndarray]]] = {
        c: {"out": [], "in": []} for c in seed_map.characters
    }
    for mention, dirs in profiles.items():
        char = seed_map.resolve(mention)
        if char is not None:
            char_vecs[char]["out"].extend(dirs["out"])
            char_vecs[char]["in"].extend(dirs["in"])
    char_profiles = {
        c: {d: mean_or_none(vs) for d, vs in dirs.items()} for c, dirs in char_vecs.items()
    }

    result = seed_map
    for mention in sorted(profiles):
        if seed_map.resolve(mention) is not None:
            continue
        mention_profile = {d: mean_or_none(vs) for d, vs in profiles[mention].items()}
        best: tuple[float, str] | None = None
        for char in sorted(seed_map.characters):
            sims = []
            for direction in ("out", "in"):
                mp = mention_profile[direction]
                cp = char_profiles[char][direction]
                if mp is not None and cp is not None:
                    sims.append(cosine(mp, cp))
            if not sims:
                continue
            sim = float(np.mean(sims))
            if best is None or sim > best[0]:
                best = (sim, char)
        if best is not None and best[0] > sim_threshold:
            result = result.with_mention(mention, best[1])
    return result


def _blocked(c: PhraseCluster, blocklist: frozenset[str]) -> bool:
    tokens: set[str] = set()
    for phrase in [c.label] + c.phrases:
        for token in denscluster._TOKEN_RE.findall(phrase.lower()):
            tokens.add(rule_lemma(token))
    return bool(tokens & blocklist)


def iarc(
    corpus: ReviewCorpus,
    mention_map: MentionMap,
    pair: tuple[str, str],
    table: EmbeddingTable,
    *,
    blocklist: frozenset[str] = DEFAULT_BLOCKLIST,
    excluded_labels: frozenset[str] = frozenset(),
    min_cluster_size: int = 3,
    eps: float = 2.0,
    merge_threshold: float = 1.6,
    stopwords: frozenset[str] | None = None,
) -> RelationClusterSet:
    """Cluster and label the relation phrases of one ordered character pair.

    Phrase occurrences are gathered direction-sensitively, clustered in
    embedding space, merged when near-duplicates and labeled. Clusters whose
    label or members touch the hypothetical blocklist, or whose label is in
    the exclusion file, are marked non-sequenceable.
    """
    points: list[tuple[str, np.ndarray]] = []
    for t in relational_tuples(corpus):
        s = mention_map.resolve(t.subject_head)
        o = mention_map.resolve(t.object_head)
        if s == pair[0] and o == pair[1] and s is not None and o is not None:
            points.append((_phrase_key(t), _lookup_vec(table, t)))
    if not points:
        return RelationClusterSet(pair=pair, clusters=[], labels=frozenset())

    clusters = denscluster.cluster(points, min_cluster_size=min_cluster_size,
                                   distance_threshold=eps)
    for c in clusters:
        if not c.is_noise:
            c.label = denscluster.label_cluster(c, stopwords)
    clusters = denscluster.merge_similar(clusters, merge_threshold, stopwords)

    seen_labels: set[str] = set()
    for c in clusters:
        if c.is_noise:
            continue
        if c.label in seen_labels:
            n = 2
            while f"{c.label}#{n}" in seen_labels:
                n += 1
            c.label = f"{c.label}#{n}"
        seen_labels.add(c.label)
        if _blocked(c, blocklist) or c.label in excluded_labels:
            c.non_sequenceable = True
    labels = frozenset(c.label for c in clusters if not c.is_noise)
    return RelationClusterSet(pair=pair, clusters=clusters, labels=labels)


def iarc_all_pairs(
    corpus: ReviewCorpus,
    mention_map: MentionMap,
    table: EmbeddingTable,
    **kwargs,
) -> list[RelationClusterSet]:
    """Run relation clustering for every ordered pair seen in the corpus."""
    pairs: set[tuple[str, str]] = set()
    for t in relational_tuples(corpus):
        s = mention_map.resolve(t.subject_head)
        o = mention_map.resolve(t.object_head)
        if s is not None and o is not None and s != o:
            pairs.add((s, o))
    return [iarc(corpus, mention_map, pair, table, **kwargs) for pair in sorted(pairs)]


def event_vocabulary(cluster_sets: Sequence[RelationClusterSet]) -> list[Event]:
    """Assign dense ids to every sequenceable (subject, label, object) triple."""
    events: list[Event] = []
    for cs in sorted(cluster_sets, key=lambda cs: cs.pair):
        for c in sorted(cs.sequenceable_clusters(), key=lambda c: c.id):
            events.append(Event(subject=cs.pair[0], relation_label=c.label,
                                object=cs.pair[1], id=len(events)))
    return events


def build_event_sequences(
    corpus: ReviewCorpus,
    mention_map: MentionMap,
    cluster_sets: Sequence[RelationClusterSet],
    vocabulary: Sequence[Event] | None = None,
) -> dict[str, list[Event]]:
    """Turn each review's surviving tuples into its ordered event sequence.

    A tuple becomes an event when both heads resolve to characters and its
    relation phrase belongs to a sequenceable cluster of that pair.
    Consecutive duplicate events within a review collapse to one.
    """
    vocabulary = vocabulary if vocabulary is not None else event_vocabulary(cluster_sets)
    by_triple = {(e.subject, e.relation_label, e.object): e for e in vocabulary}

    phrase_to_label: dict[tuple[str, str], dict[str, str | None]] = {}
    for cs in cluster_sets:
        table: dict[str, str | None] = {}
        for c in cs.clusters:
            value = None if (c.is_noise or c.non_sequenceable) else c.label
            for phrase in c.phrases:
                table.setdefault(phrase, value)
        phrase_to_label[cs.pair] = table

    sequences: dict[str, list[Event]] = {}
    for review_id in sorted(corpus.reviews):
        seq: list[Event] = []
        for t in corpus.reviews[review_id]:
            if t.kind is TupleKind.SVCOP:
                continue
            s = mention_map.resolve(t.subject_head)
            o = mention_map.resolve(t.object_head)
            if s is None or o is None:
                continue
            label = phrase_to_label.get((s, o), {}).get(_phrase_key(t))
            if label is None:
                continue
            event = by_triple.get((s, label, o))
            if event is None:
                continue
            if seq and seq[-1].id == event.id:
                continue
            seq.append(event)
        sequences[review_id] = seq
    return sequences


def write_cluster_records(cluster_sets: Sequence[RelationClusterSet], path: str | Path) -> None:
    """Line-delimited cluster records (labels and member phrases, no vectors)."""
    with open(path, "w", encoding="utf-8") as fh:
        for cs in sorted(cluster_sets, key=lambda cs: cs.pair):
            for c in sorted(cs.clusters, key=lambda c: c.id):
                rec = {
                    "type": "cluster",
                    "pair": list(cs.pair),
                    "id": c.id,
                    "label": c.label,
                    "non_sequenceable": c.non_sequenceable,
                    "members": c.phrases,
                }
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_cluster_records(path: str | Path) -> list[RelationClusterSet]:
    """Rebuild cluster sets from records; member vectors are not restored."""
    by_pair: dict[tuple[str, str], list[PhraseCluster]] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            obj = json.loads(raw)
            c = PhraseCluster(
                id=obj["id"],
                members=[(p, None) for p in obj["members"]],
                label=obj["label"],
                non_sequenceable=obj["non_sequenceable"],
            )
            by_pair.setdefault(tuple(obj["pair"]), []).append(c)
    out = []
    for pair in sorted(by_pair):
        clusters = sorted(by_pair[pair], key=lambda c: c.id)
        labels = frozenset(c.label for c in clusters if not c.is_noise)
        out.append(RelationClusterSet(pair=pair, clusters=clusters, labels=labels))
    return out


def write_event_records(
    vocabulary: Sequence[Event],
    sequences: Mapping[str, Sequence[Event]],
    path: str | Path,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in vocabulary:
            rec = {"type": "event", "id": e.id, "subject": e.subject,
                   "label": e.relation_label, "object": e.object}
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
        for review_id in sorted(sequences):
            rec = {"type": "sequence", "review_id": review_id,
                   "event_ids": [e.id for e in sequences[review_id]]}
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_event_records(path: str | Path) -> tuple[list[Event], dict[str, list[Event]]]:
    vocabulary: dict[int, Event] = {}
    raw_sequences: dict[str, list[int]] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            obj = json.loads(raw)
            if obj["type"] == "event":
                e = Event(subject=obj["subject"], relation_label=obj["label"],
                          object=obj["object"], id=obj["id"])
                vocabulary[e.id] = e
            elif obj["type"] == "sequence":
                raw_sequences[obj["review_id"]] = obj["event_ids"]
    vocab = [vocabulary[i] for i in sorted(vocabulary)]
    sequences = {
        review_id: [vocabulary[i] for i in ids]
        for review_id, ids in raw_sequences.items()
    }
    return vocab, sequences
