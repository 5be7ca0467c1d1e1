"""Phrase-embedding storage, cosine similarity and joint PCA projection.

The table is loaded once from a line-delimited file and is immutable after
that; every operation here is pure, so concurrent readers are safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "EmbeddingTable",
    "ProjectedSet",
    "ZeroVector",
    "LengthMismatch",
    "InsufficientSamples",
    "MissingEmbedding",
    "cosine",
    "pca_project",
    "cluster_score",
]


class ZeroVector(ValueError):
    """Cosine similarity is undefined for an all-zero vector."""


class LengthMismatch(ValueError):
    """Vectors of different lengths were compared."""


class InsufficientSamples(ValueError):
    """Fewer vectors than requested principal components."""


class MissingEmbedding(KeyError):
    """A phrase has no vector in the table (on-the-fly encoding is refused)."""


@dataclass
class EmbeddingTable:
    """Exact phrase string -> vector, all of one dimension."""

    dim: int
    vectors: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        for phrase, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise LengthMismatch(f"vector for {phrase!r} has length {vec.shape}, want {self.dim}")
            if not np.any(vec):
                raise ZeroVector(f"vector for {phrase!r} is all-zero")

    def __contains__(self, phrase: str) -> bool:
        return phrase in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def lookup(self, phrase: str, fallback: str | None = None) -> np.ndarray:
        vec = self.vectors.get(phrase)
        if vec is None and fallback is not None:
            vec = self.vectors.get(fallback)
        if vec is None:
            raise MissingEmbedding(phrase)
        return vec

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        """Read a line-delimited (phrase, dim, comma-separated floats) file.

        Lines starting with '#' carry encoder metadata and are skipped.
        """
        vectors: dict[str, np.ndarray] = {}
        dim: int | None = None
        with open(path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                raw = raw.rstrip("\n")
                if not raw or raw.startswith("#"):
                    continue
                parts = raw.split("\t")
                if len(parts) != 3:
                    raise ValueError(f"{path}:{line_no}: expected 3 tab-separated fields")
                phrase, dim_str, values = parts
                try:
                    rec_dim = int(dim_str)
                    vec = np.array([float(x) for x in values.split(",")], dtype=float)
                except ValueError as exc:
                    raise ValueError(f"{path}:{line_no}: {exc}") from exc
                if vec.shape != (rec_dim,):
                    raise LengthMismatch(f"{path}:{line_no}: {len(vec)} values, declared dim {rec_dim}")
                if dim is None:
                    dim = rec_dim
                elif rec_dim != dim:
                    raise LengthMismatch(f"{path}:{line_no}: dim {rec_dim} differs from file dim {dim}")
                vectors[phrase] = vec
        if dim is None:
            raise ValueError(f"{path}: no embedding records")
        return cls(dim=dim, vectors=vectors)

    def save(self, path: str | Path, header: str | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if header:
                fh.write(f"# {header}\n")
            for phrase in sorted(self.vectors):
                values = ",".join(repr(float(x)) for x in self.vectors[phrase])
                fh.write(f"{phrase}\t{self.dim}\t{values}\n")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity clamped to [-1, 1] against rounding."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise LengthMismatch(f"lengths {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass
class ProjectedSet:
    """One input set projected onto the shared principal components."""

    components: int
    phrases: list[str]
    vectors: np.ndarray  # shape (len(phrases), components)


def pca_project(sets: Sequence[tuple[list[str], np.ndarray]], k: int) -> list[ProjectedSet]:
    """Fit PCA jointly on the union of all sets and project each with it.

    Mean-centering and the covariance eigendecomposition use the pooled
    vectors; the top-k components are taken by descending eigenvalue with
    ties broken by eigenvector column index, and each component's sign is
    fixed by making its largest-magnitude loading positive.
    """
    if k < 1:
        raise ValueError("k must be positive")
    matrices = [np.asarray(m, dtype=float) for _, m in sets]
    if not matrices:
        raise InsufficientSamples("no input sets")
    dims = {m.shape[1] for m in matrices}
    if len(dims) != 1:
        raise LengthMismatch(f"mixed dimensions {sorted(dims)}")
    pooled = np.vstack(matrices)
    if pooled.shape[0] < k:
        raise InsufficientSamples(f"{pooled.shape[0]} vectors for {k} components")
    mean = pooled.mean(axis=0)
    centered = pooled - mean
    cov = centered.T @ centered / pooled.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = sorted(range(len(eigvals)), key=lambda i: (-eigvals[i], i))[:k]
    basis = eigvecs[:, order].copy()
    for j in range(basis.shape[1]):
        col = basis[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0:
            basis[:, j] = -col
    out = []
    for (phrases, _), matrix in zip(sets, matrices):
        out.append(ProjectedSet(components=k, phrases=list(phrases),
                                vectors=(matrix - mean) @ basis))
    return out


def cluster_score(left: np.ndarray, right: np.ndarray) -> float:
    """Two-sided mean best-match cosine between clusters of vectors.

    For each vector of one cluster take its best cosine match in the other,
    average per side, and sum the two sides. The result lies in [-2, 2], is
    symmetric, and equals exactly 2 for a cluster against itself.
    """
    left = np.atleast_2d(np.asarray(left, dtype=float))
    right = np.atleast_2d(np.asarray(right, dtype=float))
    if left.shape[1] != right.shape[1]:
        raise LengthMismatch(f"dims {left.shape[1]} and {right.shape[1]}")
    ln = np.linalg.norm(left, axis=1)
    rn = np.linalg.norm(right, axis=1)
    if np.any(ln == 0.0) or np.any(rn == 0.0):
        raise ZeroVector("cluster contains a zero vector")
    sims = (left / ln[:, None]) @ (right / rn[:, None]).T
    sims = np.clip(sims, -1.0, 1.0)
    s1 = float(sims.max(axis=1).mean())
    s2 = float(sims.max(axis=0).mean())
    return s1 + s2
