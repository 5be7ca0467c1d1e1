"""Synthetic review generation from a known event DAG, plus recovery oracles.

Reviews are noisy linear extensions of a ground-truth DAG: events are
dropped independently and adjacent pairs transposed with fixed
probabilities, all reproducible from one seed. Recovery quality is
measured against the DAG's transitive reduction and partial order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .actants import Event
from .rev2seq import SequenceGraph, START, TERMINATE

__all__ = [
    "GroundTruth",
    "VocabularyMismatch",
    "random_ground_truth",
    "generate_reviews",
    "edge_accuracy",
    "write_fixture_files",
    "load_ground_truth",
]


class VocabularyMismatch(ValueError):
    """Recovered graph refers to events outside the ground truth."""


@dataclass
class GroundTruth:
    """An acyclic event DAG with synthetic characters and event triples."""

    n_events: int
    edges: frozenset[tuple[int, int]]
    characters: list[str]
    event_defs: list[tuple[str, str, str]]
    seed: int

    def __post_init__(self) -> None:
        order = {i: i for i in range(self.n_events)}
        for u, v in self.edges:
            if order[u] >= order[v]:
                raise ValueError("ground-truth edges must respect the 0..n-1 topological order")

    def events(self) -> list[Event]:
        return [Event(subject=s, relation_label=r, object=o, id=i)
                for i, (s, r, o) in enumerate(self.event_defs)]

    def reachability(self) -> np.ndarray:
        reach = np.zeros((self.n_events, self.n_events), dtype=bool)
        for u, v in self.edges:
            reach[u, v] = True
        for k in range(self.n_events):
            reach |= reach[:, k][:, None] & reach[k, :][None, :]
        return reach

    def transitive_reduction(self) -> frozenset[tuple[int, int]]:
        adj: dict[int, set[int]] = {}
        for u, v in self.edges:
            adj.setdefault(u, set()).add(v)

        def reaches(source: int, target: int) -> bool:
            stack, seen = [source], {source}
            while stack:
                x = stack.pop()
                for y in adj.get(x, ()):
                    if y == target:
                        return True
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            return False

        kept = set()
        for u, v in sorted(self.edges):
            adj[u].discard(v)
            if not reaches(u, v):
                kept.add((u, v))
                adj[u].add(v)
        return frozenset(kept)


def random_ground_truth(
    n_events: int,
    seed: int,
    n_characters: int = 4,
    edge_prob: float = 0.35,
) -> GroundTruth:
    """Random DAG over 0..n-1 (edges only forward in id order)."""
    if n_events < 1:
        raise ValueError("need at least one event")
    rng = np.random.default_rng(seed)
    edges = set()
    for u in range(n_events):
        for v in range(u + 1, n_events):
            if rng.random() < edge_prob:
                edges.add((u, v))
    characters = [f"char_{i}" for i in range(max(2, n_characters))]
    event_defs = []
    for i in range(n_events):
        s, o = rng.choice(len(characters), size=2, replace=False)
        event_defs.append((characters[int(s)], f"act{i}", characters[int(o)]))
    return GroundTruth(n_events=n_events, edges=frozenset(edges),
                       characters=characters, event_defs=event_defs, seed=seed)


def _linear_extension(gt: GroundTruth, rng: np.random.Generator) -> list[int]:
    indegree = {i: 0 for i in range(gt.n_events)}
    successors: dict[int, list[int]] = {i: [] for i in range(gt.n_events)}
    for u, v in gt.edges:
        indegree[v] += 1
        successors[u].append(v)
    available = sorted(i for i, d in indegree.items() if d == 0)
    out: list[int] = []
    while available:
        idx = int(rng.integers(len(available)))
        node = available.pop(idx)
        out.append(node)
        for nxt in successors[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                available.append(nxt)
        available.sort()
    return out


def generate_reviews(
    gt: GroundTruth,
    n: int,
    drop_p: float,
    swap_p: float,
    seed: int,
) -> dict[str, list[Event]]:
    """Sample n noisy linear extensions of the ground-truth DAG.

    Each review is a random linear extension with events independently
    dropped with probability drop_p, then a single left-to-right pass of
    adjacent transpositions each applied with probability swap_p. Identical
    seeds give identical corpora; review seeds are derived per review.
    """
    if not 0 <= drop_p <= 1 or not 0 <= swap_p <= 1:
        raise ValueError("drop_p and swap_p must lie in [0, 1]")
    events = gt.events()
    streams = np.random.SeedSequence(seed).spawn(n)
    reviews: dict[str, list[Event]] = {}
    for i, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        seq = _linear_extension(gt, rng)
        seq = [e for e in seq if rng.random() >= drop_p]
        idx = 0
        while idx < len(seq) - 1:
            if rng.random() < swap_p:
                seq[idx], seq[idx + 1] = seq[idx + 1], seq[idx]
            idx += 1
        reviews[f"synth-{i:04d}"] = [events[e] for e in seq]
    return reviews


def edge_accuracy(recovered: SequenceGraph, gt: GroundTruth) -> tuple[float, float, float]:
    """(precision, recall, order_accuracy) against the ground truth.

    Precision and recall compare non-START/TERMINATE edges with the ground
    truth's transitive reduction. Order accuracy is the fraction of
    recovered edges (u, v) that do not contradict the partial order, i.e.
    where u is not a descendant of v; it is 1 by convention when no edges
    were recovered.
    """
    recovered_edges = {
        (u, v) for u, v in recovered.edge_list()
        if u not in (START, TERMINATE) and v not in (START, TERMINATE)
    }
    for u, v in recovered_edges:
        if not (0 <= u < gt.n_events and 0 <= v < gt.n_events):
            raise VocabularyMismatch(f"edge ({u}, {v}) outside the ground-truth vocabulary")
    reduction = gt.transitive_reduction()
    reach = gt.reachability()

    hits = len(recovered_edges & reduction)
    precision = hits / len(recovered_edges) if recovered_edges else 1.0
    recall = hits / len(reduction) if reduction else 1.0
    if recovered_edges:
        consistent = sum(1 for u, v in recovered_edges if not reach[v, u])
        order_accuracy = consistent / len(recovered_edges)
    else:
        order_accuracy = 1.0
    return precision, recall, order_accuracy


def write_fixture_files(
    gt: GroundTruth,
    reviews: Mapping[str, Sequence[Event]],
    out_dir: str | Path,
    embedding_scale: float = 2.0,
) -> dict[str, Path]:
    """Emit tuple, review-text, character and embedding files for ingestion.

    Relation words get scaled one-hot embeddings so that occurrences of the
    same word form tight clusters while distinct words stay beyond the
    default clustering threshold.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "tuples": out_dir / "tuples.jsonl",
        "reviews": out_dir / "reviews.jsonl",
        "characters": out_dir / "characters.tsv",
        "embeddings": out_dir / "embeddings.tsv",
        "ground_truth": out_dir / "ground_truth.json",
    }

    with open(paths["tuples"], "w", encoding="utf-8") as fh:
        for review_id in sorted(reviews):
            for pos, event in enumerate(reviews[review_id]):
                sentence = f"{event.subject} {event.relation_label} {event.object}."
                rec = {
                    "review_id": review_id,
                    "position": pos,
                    "subject_text": event.subject,
                    "subject_head": event.subject,
                    "relation_text": event.relation_label,
                    "object_text": event.object,
                    "object_head": event.object,
                    "kind": "SVO",
                    "sentence_flags": [],
                    "sentence_text": sentence,
                }
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")

    with open(paths["reviews"], "w", encoding="utf-8") as fh:
        for review_id in sorted(reviews):
            text = " ".join(
                f"{e.subject} {e.relation_label} {e.object}." for e in reviews[review_id]
            )
            fh.write(json.dumps({"review_id": review_id, "text": text},
                                ensure_ascii=False, sort_keys=True) + "\n")

    with open(paths["characters"], "w", encoding="utf-8") as fh:
        for ch in gt.characters:
            fh.write(f"{ch}\t{ch}\t{ch}\n")

    relations = sorted({r for _, r, _ in gt.event_defs})
    dim = len(relations)
    with open(paths["embeddings"], "w", encoding="utf-8") as fh:
        fh.write(f"# encoder=synthetic-onehot dim={dim}\n")
        for i, rel in enumerate(relations):
            vec = ["0.0"] * dim
            vec[i] = repr(float(embedding_scale))
            fh.write(f"{rel}\t{dim}\t{','.join(vec)}\n")

    with open(paths["ground_truth"], "w", encoding="utf-8") as fh:
        json.dump({
            "n_events": gt.n_events,
            "edges": sorted(list(e) for e in gt.edges),
            "characters": gt.characters,
            "event_defs": [list(d) for d in gt.event_defs],
            "seed": gt.seed,
        }, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
    return paths


def load_ground_truth(path: str | Path) -> GroundTruth:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return GroundTruth(
        n_events=obj["n_events"],
        edges=frozenset(tuple(e) for e in obj["edges"]),
        characters=list(obj["characters"]),
        event_defs=[tuple(d) for d in obj["event_defs"]],
        seed=obj["seed"],
    )
