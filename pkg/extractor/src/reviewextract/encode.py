"""Phrase encoders producing the embedding-file format.

The default encoder is a deterministic hashed bag-of-words projection:
each lemmatized token hashes to a fixed 768-dimensional Gaussian vector
and a phrase embeds as the normalized token mean. It needs no model
download and is reproducible from the phrase text alone. When a
sentence-transformers model is available locally it can be selected by
name instead; either way the exact encoder identifier is pinned in the
output file header and the consumer refuses mixed-dimension files.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np

from .extract import rule_lemma

__all__ = ["HashEncoder", "ModelLoadError", "make_encoder", "write_embedding_file"]

HASH_ENCODER_ID = "hash-proj-768/v1"
_TOKEN = re.compile(r"[A-Za-z][A-Za-z''-]*")


class ModelLoadError(RuntimeError):
    """The requested pretrained encoder could not be loaded."""


class Encoder(Protocol):
    name: str
    dim: int

    def encode(self, phrases: list[str]) -> np.ndarray: ...


class HashEncoder:
    """Deterministic hashed bag-of-words projection."""

    def __init__(self, dim: int = 768):
        self.name = HASH_ENCODER_ID
        self.dim = dim
        self._token_cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            seed = int.from_bytes(digest[:8], "big")
            vec = np.random.default_rng(seed).standard_normal(self.dim)
            self._token_cache[token] = vec
        return vec

    def _phrase_vector(self, phrase: str) -> np.ndarray:
        tokens = [rule_lemma(t.lower()) for t in _TOKEN.findall(phrase)]
        if not tokens:
            tokens = [phrase]
        vec = np.mean([self._token_vector(t) for t in tokens], axis=0)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            vec = self._token_vector(phrase)
            norm = np.linalg.norm(vec)
        return vec / norm

    def encode(self, phrases: list[str]) -> np.ndarray:
        return np.vstack([self._phrase_vector(p) for p in phrases])


class PretrainedEncoder:
    """sentence-transformers wrapper, used when a model is available."""

    def __init__(self, model, name: str):
        self._model = model
        self.name = name
        self.dim = int(model.get_sentence_embedding_dimension())

    def encode(self, phrases: list[str]) -> np.ndarray:
        return np.asarray(self._model.encode(phrases, show_progress_bar=False),
                          dtype=float)


def make_encoder(spec: str = HASH_ENCODER_ID) -> Encoder:
    if spec == HASH_ENCODER_ID:
        return HashEncoder()
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ModelLoadError(f"sentence-transformers is not installed ({exc})") from exc
    try:
        model = SentenceTransformer(spec)
    except Exception as exc:
        raise ModelLoadError(f"could not load encoder {spec!r}: {exc}") from exc
    return PretrainedEncoder(model, spec)


def write_embedding_file(phrases: Iterable[str], encoder: Encoder,
                         path: str | Path) -> int:
    """One record per distinct phrase, with the encoder pinned in the header."""
    distinct: list[str] = []
    seen: set[str] = set()
    for phrase in phrases:
        phrase = phrase.strip()
        if phrase and phrase not in seen:
            seen.add(phrase)
            distinct.append(phrase)
    distinct.sort()
    vectors = encoder.encode(distinct) if distinct else np.empty((0, encoder.dim))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# encoder={encoder.name} dim={encoder.dim}\n")
        for phrase, vec in zip(distinct, vectors):
            values = ",".join(repr(float(x)) for x in vec)
            fh.write(f"{phrase}\t{encoder.dim}\t{values}\n")
    return len(distinct)
