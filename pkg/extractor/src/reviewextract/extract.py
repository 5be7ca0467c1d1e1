"""Rule-based SVO / SVCOP extraction from raw review sentences.

One pattern pass per sentence: a copular clause yields one SVCOP record
per coordinated complement, otherwise the first subject-verb-object span
becomes an SVO record. Pronoun subjects are skipped rather than resolved,
which keeps every emitted mention a surface form from the text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = ["ExtractionRecord", "extract_review", "extract_reviews", "rule_lemma"]

_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+")
_TOKEN = re.compile(r"[A-Za-z][A-Za-z''-]*")
_MODAL = re.compile(r"\b(would|could|should)\b", re.IGNORECASE)

COPULAS = {"is", "was", "are", "were", "be", "been", "being", "seems",
           "seemed", "appears", "appeared", "becomes", "became"}
DETERMINERS = {"the", "a", "an", "this", "that", "these", "those",
               "his", "her", "their", "its", "our", "my", "your"}
PRONOUNS = {"i", "we", "you", "he", "she", "it", "they", "him", "her",
            "them", "me", "us", "who", "which", "there"}
# tokens that end an object span
BOUNDARIES = {"and", "but", "because", "while", "when", "after", "before",
              "for", "in", "on", "at", "with", "of", "from", "by", "to",
              "as", "so", "that", "if", "than"}

_VOWELS = "aeiou"


def rule_lemma(word: str) -> str:
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
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in _VOWELS and stem[-1] not in "lsz":
        return stem[:-1]
    if (len(stem) >= 3 and stem[-1] not in _VOWELS and stem[-1] not in "wxy"
            and stem[-2] in _VOWELS and stem[-3] not in _VOWELS):
        return stem + "e"
    return stem


@dataclass
class ExtractionRecord:
    """Mirror of the tuple-file record schema."""

    review_id: str
    position: int
    subject_text: str
    subject_head: str
    relation_text: str
    object_text: str
    object_head: str
    kind: str
    sentence_flags: list[str]
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
            "kind": self.kind,
            "sentence_flags": sorted(self.sentence_flags),
            "sentence_text": self.sentence_text,
        }
        if self.relation_lemma is not None:
            rec["relation_lemma"] = self.relation_lemma
        return rec


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENT_SPLIT.split(text.strip()) if s.strip()]


def _sentence_flags(sentence: str, relation: str) -> list[str]:
    flags = []
    if _MODAL.search(sentence):
        flags.append("HYPOTHETICAL")
    if relation.lower().startswith("to "):
        flags.append("INFINITIVE_RELATION")
    return flags


def _valid_subject(tokens: list[str]) -> bool:
    if not tokens or len(tokens) > 5:
        return False
    content = [t for t in tokens if t.lower() not in DETERMINERS]
    if not content:
        return False
    return content[0].lower() not in PRONOUNS


def _head(tokens: list[str]) -> str:
    content = [t for t in tokens if t.lower() not in DETERMINERS]
    return (content or tokens)[-1]


def _split_complements(tokens: list[str]) -> list[list[str]]:
    parts: list[list[str]] = [[]]
    for tok in tokens:
        if tok.lower() == "and":
            parts.append([])
        else:
            parts[-1].append(tok)
    return [p for p in parts if p]


def _copular_records(review_id: str, sentence: str, tokens: list[str],
                     start_pos: int) -> list[ExtractionRecord]:
    copula_idx = next((i for i, t in enumerate(tokens) if t.lower() in COPULAS), None)
    if copula_idx is None or copula_idx == 0:
        return []
    subject = tokens[:copula_idx]
    if not _valid_subject(subject):
        return []
    complement = tokens[copula_idx + 1:]
    if not complement:
        return []
    copula = tokens[copula_idx]
    records = []
    for piece in _split_complements(complement):
        flags = _sentence_flags(sentence, copula)
        records.append(ExtractionRecord(
            review_id=review_id,
            position=start_pos + len(records),
            subject_text=" ".join(subject),
            subject_head=_head(subject),
            relation_text=copula,
            relation_lemma="be",
            object_text=" ".join(piece),
            object_head=_head(piece),
            kind="SVCOP",
            sentence_flags=flags,
            sentence_text=sentence,
        ))
    return records


def _svo_record(review_id: str, sentence: str, tokens: list[str],
                position: int) -> ExtractionRecord | None:
    lower = [t.lower() for t in tokens]

    # subject: optional determiners followed by a short noun-phrase run
    idx = 0
    while idx < len(tokens) and lower[idx] in DETERMINERS:
        idx += 1
    subj_start = 0
    subj_end = idx
    if idx < len(tokens) and tokens[idx][0].isupper():
        while subj_end < len(tokens) and tokens[subj_end][0].isupper():
            subj_end += 1
    elif idx < len(tokens):
        subj_end = idx + 1
    subject = tokens[subj_start:subj_end]
    if not _valid_subject(subject):
        return None

    # relation: lowercase run after the subject
    rel_start = subj_end
    rel_end = rel_start
    while (rel_end < len(tokens) and not tokens[rel_end][0].isupper()
           and lower[rel_end] not in DETERMINERS and rel_end - rel_start < 4):
        rel_end += 1
    relation = tokens[rel_start:rel_end]
    if not relation or rel_end == len(tokens):
        return None

    # object: up to the next clause or preposition boundary
    obj_end = rel_end
    while obj_end < len(tokens) and lower[obj_end] not in BOUNDARIES:
        obj_end += 1
    obj = tokens[rel_end:obj_end]
    if not obj:
        return None
    obj_content = [t for t in obj if t.lower() not in DETERMINERS]
    if not obj_content or obj_content[0].lower() in PRONOUNS:
        return None

    relation_text = " ".join(relation)
    lemma = rule_lemma(relation[0]) if len(relation) == 1 else None
    return ExtractionRecord(
        review_id=review_id,
        position=position,
        subject_text=" ".join(subject),
        subject_head=_head(subject),
        relation_text=relation_text,
        relation_lemma=lemma,
        object_text=" ".join(obj),
        object_head=_head(obj),
        kind="SVO",
        sentence_flags=_sentence_flags(sentence, relation_text),
        sentence_text=sentence,
    )


def extract_review(review_id: str, text: str) -> list[ExtractionRecord]:
    """All tuple records of one review, positions in reading order."""
    records: list[ExtractionRecord] = []
    for sentence in split_sentences(text):
        tokens = _TOKEN.findall(sentence)
        if len(tokens) < 3:
            continue
        copular = _copular_records(review_id, sentence, tokens, len(records))
        if copular:
            records.extend(copular)
            continue
        svo = _svo_record(review_id, sentence, tokens, len(records))
        if svo is not None:
            records.append(svo)
    return records


def extract_reviews(reviews: dict[str, str]) -> list[ExtractionRecord]:
    records: list[ExtractionRecord] = []
    for review_id in sorted(reviews):
        records.extend(extract_review(review_id, reviews[review_id]))
    return records
