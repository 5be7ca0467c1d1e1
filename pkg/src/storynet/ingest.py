"""Parsing, validation and event-eligibility filtering for review tuple files.

The input is a line-delimited file of relationship tuple records (one JSON
object per line) plus an optional line-delimited file of raw review texts.
Everything downstream treats the resulting :class:`ReviewCorpus` as immutable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

__all__ = [
    "TupleKind",
    "RelationTuple",
    "ReviewCorpus",
    "StopEntityList",
    "MalformedRecord",
    "DuplicatePosition",
    "MissingReviewText",
    "parse_tuples",
    "parse_reviews",
    "load_corpus",
    "serialize_tuples",
    "filter_eligible_events",
    "lemmatize_relation",
    "lemmatize_corpus",
    "rule_lemma",
    "is_hypothetical",
    "HYPOTHETICAL",
    "INFINITIVE_RELATION",
    "DEFAULT_STOP_ENTITIES",
]


class TupleKind(str, Enum):
    SVO = "SVO"
    SVCOP = "SVCOP"
    OTHER = "OTHER"


HYPOTHETICAL = "HYPOTHETICAL"
INFINITIVE_RELATION = "INFINITIVE_RELATION"
VALID_FLAGS = frozenset({HYPOTHETICAL, INFINITIVE_RELATION})

# Modal words that mark a sentence as hypothetical. The extractor sets the
# flag upstream; we re-derive it from the sentence text as a cross-check.
_MODAL_RE = re.compile(r"\b(would|could|should)\b", re.IGNORECASE)

DEFAULT_STOP_ENTITIES = ("I", "We", "Author")

_REQUIRED_FIELDS = (
    "review_id",
    "position",
    "subject_text",
    "subject_head",
    "relation_text",
    "object_text",
    "object_head",
    "kind",
    "sentence_flags",
    "sentence_text",
)


class MalformedRecord(ValueError):
    """A tuple-file line failed schema validation."""

    def __init__(self, line_no: int, field_name: str, detail: str):
        self.line_no = line_no
        self.field_name = field_name
        super().__init__(f"line {line_no}, field {field_name!r}: {detail}")


class DuplicatePosition(ValueError):
    """Two tuples in the same review share a position."""

    def __init__(self, review_id: str, position: int):
        self.review_id = review_id
        self.position = position
        super().__init__(f"review {review_id!r}: duplicate position {position}")


class MissingReviewText(ValueError):
    """A tuple references a review_id absent from the raw-text file."""


@dataclass(frozen=True)
class RelationTuple:
    """One extracted (subject, relation, object) with review provenance."""

    review_id: str
    position: int
    subject_text: str
    subject_head: str
    relation_text: str
    object_text: str
    object_head: str
    kind: TupleKind
    sentence_flags: frozenset[str]
    sentence_text: str
    relation_lemma: str | None = None

    def to_record(self) -> dict:
        rec = {
            "review_id": self.review_id,
            "position": self.position,
            "subject_text": self.subject_text,
            "subject_head": self.subject_head,
            "relation_text": self.relation_text,
            "object_text": self.object_text,
            "object_head": self.object_head,
            "kind": self.kind.value,
            "sentence_flags": sorted(self.sentence_flags),
            "sentence_text": self.sentence_text,
        }
        if self.relation_lemma is not None:
            rec["relation_lemma"] = self.relation_lemma
        return rec


@dataclass
class ReviewCorpus:
    """All tuples grouped per review, in mention order, plus raw texts."""

    reviews: dict[str, list[RelationTuple]] = field(default_factory=dict)
    raw_texts: dict[str, str] = field(default_factory=dict)

    def __iter__(self) -> Iterator[RelationTuple]:
        for review_id in sorted(self.reviews):
            yield from self.reviews[review_id]

    @property
    def n_reviews(self) -> int:
        return len(self.reviews)

    @property
    def n_tuples(self) -> int:
        return sum(len(ts) for ts in self.reviews.values())

    def validate(self) -> None:
        for review_id, tuples in self.reviews.items():
            positions = [t.position for t in tuples]
            if positions != sorted(positions):
                raise ValueError(f"review {review_id!r}: tuples not sorted by position")
            if len(set(positions)) != len(positions):
                raise DuplicatePosition(review_id, _first_duplicate(positions))
            if self.raw_texts and review_id not in self.raw_texts:
                raise MissingReviewText(f"review {review_id!r} has tuples but no raw text")


@dataclass(frozen=True)
class StopEntityList:
    """Case-insensitive set of entity mentions excluded from events."""

    entries: frozenset[str] = frozenset(e.casefold() for e in DEFAULT_STOP_ENTITIES)

    def __contains__(self, mention: str) -> bool:
        return mention.casefold() in self.entries

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "StopEntityList":
        entries = frozenset(w.strip().casefold() for w in words if w.strip())
        if not entries:
            raise ValueError("stop-entity list must not be empty")
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "StopEntityList":
        return cls.from_words(Path(path).read_text(encoding="utf-8").splitlines())


def _first_duplicate(positions: list[int]) -> int:
    seen: set[int] = set()
    for p in positions:
        if p in seen:
            return p
        seen.add(p)
    raise AssertionError("no duplicate present")


def _parse_record(line_no: int, raw: str) -> RelationTuple:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(line_no, "-", f"invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "-", "record is not an object")
    for name in _REQUIRED_FIELDS:
        if name not in obj:
            raise MalformedRecord(line_no, name, "missing field")
    if not isinstance(obj["position"], int) or obj["position"] < 0:
        raise MalformedRecord(line_no, "position", "must be a nonnegative integer")
    for name in ("review_id", "subject_text", "subject_head", "relation_text",
                 "object_text", "object_head", "sentence_text"):
        if not isinstance(obj[name], str):
            raise MalformedRecord(line_no, name, "must be a string")
    for name in ("subject_head", "object_head"):
        if not obj[name].strip():
            raise MalformedRecord(line_no, name, "must be nonempty")
    if not obj["relation_text"].strip():
        raise MalformedRecord(line_no, "relation_text", "must be nonempty")
    try:
        kind = TupleKind(obj["kind"])
    except ValueError:
        raise MalformedRecord(line_no, "kind", f"unknown kind {obj['kind']!r}") from None
    flags_raw = obj["sentence_flags"]
    if not isinstance(flags_raw, list) or not all(isinstance(f, str) for f in flags_raw):
        raise MalformedRecord(line_no, "sentence_flags", "must be a list of strings")
    unknown = set(flags_raw) - VALID_FLAGS
    if unknown:
        raise MalformedRecord(line_no, "sentence_flags", f"unknown flags {sorted(unknown)}")
    if kind is TupleKind.SVCOP and not obj["object_text"].strip():
        raise MalformedRecord(line_no, "object_text", "SVCOP requires a descriptor phrase")
    lemma = obj.get("relation_lemma")
    if lemma is not None and not isinstance(lemma, str):
        raise MalformedRecord(line_no, "relation_lemma", "must be a string when present")
    return RelationTuple(
        review_id=obj["review_id"],
        position=obj["position"],
        subject_text=obj["subject_text"],
        subject_head=obj["subject_head"],
        relation_text=obj["relation_text"],
        object_text=obj["object_text"],
        object_head=obj["object_head"],
        kind=kind,
        sentence_flags=frozenset(flags_raw),
        sentence_text=obj["sentence_text"],
        relation_lemma=lemma,
    )


def parse_tuples(path: str | Path) -> ReviewCorpus:
    """Parse a line-delimited tuple file into a validated corpus.

    Raises :class:`MalformedRecord` (with line number and field) on the first
    schema failure and :class:`DuplicatePosition` when two tuples of the same
    review share a position. Records are never silently dropped.
    """
    reviews: dict[str, list[RelationTuple]] = {}
    seen: dict[str, set[int]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            t = _parse_record(line_no, raw)
            positions = seen.setdefault(t.review_id, set())
            if t.position in positions:
                raise DuplicatePosition(t.review_id, t.position)
            positions.add(t.position)
            reviews.setdefault(t.review_id, []).append(t)
    for tuples in reviews.values():
        tuples.sort(key=lambda t: t.position)
    corpus = ReviewCorpus(reviews=reviews)
    corpus.validate()
    return corpus


def parse_reviews(path: str | Path) -> dict[str, str]:
    """Parse a line-delimited (review_id, text) file."""
    texts: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, "-", f"invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or "review_id" not in obj or "text" not in obj:
                raise MalformedRecord(line_no, "review_id/text", "record needs review_id and text")
            texts[str(obj["review_id"])] = str(obj["text"])
    return texts


def load_corpus(tuples_path: str | Path, reviews_path: str | Path | None = None) -> ReviewCorpus:
    """Parse tuples and (optionally) raw texts, enforcing cross-file invariants."""
    corpus = parse_tuples(tuples_path)
    if reviews_path is not None:
        corpus.raw_texts = parse_reviews(reviews_path)
        corpus.validate()
    return corpus


def serialize_tuples(corpus: ReviewCorpus, path: str | Path) -> None:
    """Write the corpus back out in the tuple-file format (round-trip safe)."""
    with open(path, "w", encoding="utf-8") as fh:
        for review_id in sorted(corpus.reviews):
            for t in corpus.reviews[review_id]:
                fh.write(json.dumps(t.to_record(), ensure_ascii=False, sort_keys=True))
                fh.write("\n")


def is_hypothetical(t: RelationTuple) -> bool:
    """Flagged hypothetical, or the sentence contains a modal word."""
    return HYPOTHETICAL in t.sentence_flags or bool(_MODAL_RE.search(t.sentence_text))


def filter_eligible_events(corpus: ReviewCorpus, stops: StopEntityList | None = None) -> ReviewCorpus:
    """Drop tuples that cannot become events.

    Removes tuples whose sentence is hypothetical, whose relation is flagged
    as starting with an infinitive, whose subject and object heads coincide,
    or whose heads are stop entities. The relative order of survivors within
    each review is preserved; filtering is idempotent.
    """
    stops = stops or StopEntityList()
    reviews: dict[str, list[RelationTuple]] = {}
    for review_id, tuples in corpus.reviews.items():
        kept = [t for t in tuples if _eligible(t, stops)]
        if kept:
            reviews[review_id] = kept
    return ReviewCorpus(reviews=reviews, raw_texts=corpus.raw_texts)


def _eligible(t: RelationTuple, stops: StopEntityList) -> bool:
    if is_hypothetical(t):
        return False
    if INFINITIVE_RELATION in t.sentence_flags:
        return False
    if t.subject_head.casefold() == t.object_head.casefold():
        return False
    if t.subject_head in stops or t.object_head in stops:
        return False
    return True


_VOWELS = "aeiou"


def rule_lemma(word: str) -> str:
    """Deterministic suffix-stripping fallback for single words.

    Handles the regular s/es/ies/ed/ing families with consonant undoubling
    and final-e restoration. Irregular forms pass through unchanged; callers
    should prefer an extractor-provided lemma when one exists.
    """
    w = word.lower()
    if len(w) <= 3:
        return w
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith("sses"):
        return w[:-2]
    if w.endswith("es") and w[:-2].endswith(("s", "x", "z", "ch", "sh", "o")):
        return w[:-2]
    if w.endswith("ied") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith("ed") and len(w) > 4:
        return _fix_stem(w[:-2])
    if w.endswith("ing") and len(w) > 5:
        return _fix_stem(w[:-3])
    if w.endswith("s") and not w.endswith(("ss", "us", "is")):
        return w[:-1]
    return w


def _fix_stem(stem: str) -> str:
    # stopped -> stopp -> stop
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS and stem[-1] not in "lsz":
        return stem[:-1]
    # lov -> love (short CVC stems usually lost a final e)
    if (len(stem) >= 3 and stem[-1] not in _VOWELS and stem[-1] not in "wxy"
            and stem[-2] in _VOWELS and stem[-3] not in _VOWELS):
        return stem + "e"
    return stem


def lemmatize_relation(t: RelationTuple) -> RelationTuple:
    """Fill in relation_lemma for single-word relations.

    An extractor-provided lemma always wins; multi-word relations pass
    through unchanged.
    """
    if t.relation_lemma is not None:
        return t
    phrase = t.relation_text.strip()
    if " " in phrase:
        return t
    return replace(t, relation_lemma=rule_lemma(phrase))


def lemmatize_corpus(corpus: ReviewCorpus) -> ReviewCorpus:
    reviews = {
        review_id: [lemmatize_relation(t) for t in tuples]
        for review_id, tuples in corpus.reviews.items()
    }
    return ReviewCorpus(reviews=reviews, raw_texts=corpus.raw_texts)
