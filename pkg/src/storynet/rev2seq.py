"""Consensus event sequencing from per-review event orderings.

Per-review sequences are aggregated into a precedence matrix over the event
vocabulary plus START and TERMINATE; the matrix is normalized, two-node
cycles are resolved by majority, a frontier search accepts precedence edges
only when they close no cycle while assigning timeline steps, and the
accepted DAG is transitively reduced. Scoring compares eligible edges to
judge label files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .actants import Event

__all__ = [
    "START",
    "TERMINATE",
    "PrecedenceMatrix",
    "SequenceGraph",
    "ScoreReport",
    "UnknownEvent",
    "CycleDetected",
    "MissingLabel",
    "build_precedence_matrix",
    "preprocess",
    "resolve_two_cycles",
    "sbfs",
    "transitive_reduce",
    "score",
    "load_labels",
    "write_sequence_records",
    "read_sequence_records",
    "sequence_to_dot",
]

# Sentinel node ids; event ids are dense nonnegative integers.
START = -1
TERMINATE = -2

START_NAME = "START"
TERMINATE_NAME = "TERMINATE"


class UnknownEvent(ValueError):
    """A sequence refers to an event outside the vocabulary."""


class CycleDetected(ValueError):
    """A graph expected to be acyclic contains a cycle."""


class MissingLabel(ValueError):
    """A judge label is missing for an eligible edge."""


@dataclass
class PrecedenceMatrix:
    """Counts (or likelihoods) over events plus START and TERMINATE.

    Row and column 0 hold START, the last row and column hold TERMINATE,
    and row i+1 holds the event `event_ids[i]`.
    """

    counts: np.ndarray
    event_ids: list[int]
    review_support: np.ndarray
    normalized: bool = False

    @property
    def size(self) -> int:
        return self.counts.shape[0]

    @property
    def n_events(self) -> int:
        return len(self.event_ids)

    @property
    def event_index(self) -> dict[int, int]:
        return {event_id: row + 1 for row, event_id in enumerate(self.event_ids)}

    def node_of_row(self, row: int) -> int:
        if row == 0:
            return START
        if row == self.size - 1:
            return TERMINATE
        return self.event_ids[row - 1]


def build_precedence_matrix(
    sequences: Mapping[str, Sequence[Event]],
    n_events: int,
    pairs: str = "adjacent",
    per_review_dedup: bool = False,
) -> PrecedenceMatrix:
    """Aggregate per-review precedence counts.

    With pairs="adjacent" each ordered adjacent pair in a review adds one
    count; pairs="all" counts every ordered pair. With per_review_dedup a
    pair contributes at most once per review. The review-support matrix
    (distinct reviews showing the adjacent pair) is tracked alongside.
    """
    if pairs not in ("adjacent", "all"):
        raise ValueError(f"unknown pairs mode {pairs!r}")
    size = n_events + 2
    counts = np.zeros((size, size), dtype=float)
    support = np.zeros((size, size), dtype=int)
    for review_id in sorted(sequences):
        seq = sequences[review_id]
        for e in seq:
            if not 0 <= e.id < n_events:
                raise UnknownEvent(f"review {review_id!r}: event id {e.id} outside vocabulary")
        rows = [e.id + 1 for e in seq]
        if pairs == "adjacent":
            ordered = list(zip(rows, rows[1:]))
        else:
            ordered = [(a, b) for i, a in enumerate(rows) for b in rows[i + 1:]]
        seen: set[tuple[int, int]] = set()
        for a, b in ordered:
            if per_review_dedup:
                if (a, b) in seen:
                    continue
                seen.add((a, b))
            counts[a, b] += 1.0
        for a, b in set(zip(rows, rows[1:])):
            support[a, b] += 1
    return PrecedenceMatrix(counts=counts, event_ids=list(range(n_events)),
                            review_support=support)


def preprocess(
    m: PrecedenceMatrix,
    start_const: float = 1.0,
    term_const: float = 1e-3,
) -> PrecedenceMatrix:
    """Install START/TERMINATE weights, drop isolates and row-normalize.

    The START row gets a constant for every event column (uniform choice of
    a first event); every event row gets a very small constant toward the
    TERMINATE column; self-loops are zeroed; events with no counts against
    other events are dropped from the index; finally rows are L1-normalized
    (all-zero rows stay zero).
    """
    counts = m.counts.copy()
    n = m.n_events
    np.fill_diagonal(counts, 0.0)

    inner = counts[1:n + 1, 1:n + 1]
    active = (inner.sum(axis=1) > 0) | (inner.sum(axis=0) > 0)
    keep_rows = [0] + [i + 1 for i in range(n) if active[i]] + [n + 1]
    event_ids = [m.event_ids[i] for i in range(n) if active[i]]
    counts = counts[np.ix_(keep_rows, keep_rows)]
    support = m.review_support[np.ix_(keep_rows, keep_rows)]

    k = len(event_ids)
    counts[0, 1:k + 1] = start_const
    counts[1:k + 1, k + 1] = term_const
    row_sums = counts.sum(axis=1, keepdims=True)
    np.divide(counts, row_sums, out=counts, where=row_sums > 0)
    return PrecedenceMatrix(counts=counts, event_ids=event_ids,
                            review_support=support, normalized=True)


def resolve_two_cycles(m: PrecedenceMatrix) -> PrecedenceMatrix:
    """Majority rule on mutual pairs: keep the larger direction, ties drop both."""
    counts = m.counts.copy()
    size = counts.shape[0]
    for i in range(size):
        for j in range(i + 1, size):
            a, b = counts[i, j], counts[j, i]
            if a > 0 and b > 0:
                if a > b:
                    counts[j, i] = 0.0
                elif b > a:
                    counts[i, j] = 0.0
                else:
                    counts[i, j] = 0.0
                    counts[j, i] = 0.0
    return PrecedenceMatrix(counts=counts, event_ids=list(m.event_ids),
                            review_support=m.review_support, normalized=m.normalized)


@dataclass
class SequenceGraph:
    """Accepted precedence DAG with timeline steps and review support."""

    edges: dict[int, set[int]] = field(default_factory=dict)
    timestep: dict[int, int] = field(default_factory=dict)
    support: dict[tuple[int, int], int] = field(default_factory=dict)
    names: dict[int, str] = field(default_factory=dict)
    dropped_weight: float = 0.0
    total_weight: float = 0.0

    def nodes(self) -> list[int]:
        out = set(self.edges) | set(self.timestep)
        for targets in self.edges.values():
            out.update(targets)
        return sorted(out)

    def edge_list(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u, targets in self.edges.items() for v in targets)

    def name_of(self, node: int) -> str:
        if node in self.names:
            return self.names[node]
        if node == START:
            return START_NAME
        if node == TERMINATE:
            return TERMINATE_NAME
        return f"e{node}"

    @property
    def dropped_fraction(self) -> float:
        return self.dropped_weight / self.total_weight if self.total_weight > 0 else 0.0

    def degree(self, node: int) -> int:
        d = 0
        for u, targets in self.edges.items():
            if u == node:
                d += len(targets)
            if node in targets:
                d += 1
        return d

    def reachable(self, source: int, target: int) -> bool:
        if source == target:
            return True
        stack = [source]
        seen = {source}
        while stack:
            u = stack.pop()
            for v in self.edges.get(u, ()):
                if v == target:
                    return True
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return False

    def check_acyclic(self) -> None:
        color: dict[int, int] = {}

        def visit(u: int) -> None:
            color[u] = 1
            for v in self.edges.get(u, ()):
                state = color.get(v, 0)
                if state == 1:
                    raise CycleDetected(f"cycle through {self.name_of(v)}")
                if state == 0:
                    visit(v)
            color[u] = 2

        for node in self.nodes():
            if color.get(node, 0) == 0:
                visit(node)


def _rows_reachable(adj: dict[int, set[int]], source: int, target: int) -> bool:
    if source == target:
        return True
    stack = [source]
    seen = {source}
    while stack:
        u = stack.pop()
        for v in adj.get(u, ()):
            if v == target:
                return True
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


def sbfs(m: PrecedenceMatrix, names: Mapping[int, str] | None = None) -> SequenceGraph:
    """Frontier search that accepts precedence edges only when acyclic.

    Starting from START, each frontier node in ascending id order proposes
    an edge to every positive column of its row; the edge is accepted only
    if no accepted path already leads back from the child to the node.
    Accepted children get timestep CURRENT_TIME + 1 (a later rediscovery
    overwrites, pushing the event further down the timeline) and join the
    next frontier. The weight of skipped cycle-closing edges is tracked
    against the total weight of the processed matrix.
    """
    size = m.size
    accepted: dict[int, set[int]] = {}
    timestep: dict[int, int] = {0: 0}
    skipped: set[tuple[int, int]] = set()
    accepted_pairs: set[tuple[int, int]] = set()

    current_time = 0
    s_curr: list[int] = [0]
    s_next: list[int] = []
    while s_curr:
        for i in sorted(s_curr):
            children = np.nonzero(m.counts[i] > 0)[0]
            for child in map(int, children):
                if _rows_reachable(accepted, child, i):
                    skipped.add((i, child))
                    continue
                accepted.setdefault(i, set()).add(child)
                accepted_pairs.add((i, child))
                timestep[child] = current_time + 1
                if child not in s_next:
                    s_next.append(child)
        s_curr = s_next
        s_next = []
        current_time += 1

    def node_of(row: int) -> int:
        return m.node_of_row(row)

    g = SequenceGraph(total_weight=float(m.counts.sum()))
    g.dropped_weight = float(sum(m.counts[i, j] for i, j in skipped))
    for i, targets in accepted.items():
        g.edges[node_of(i)] = {node_of(j) for j in targets}
    g.timestep = {node_of(r): t for r, t in timestep.items()}
    for i, j in accepted_pairs:
        g.support[(node_of(i), node_of(j))] = int(m.review_support[i, j])
    if names:
        g.names = dict(names)
    return g


def transitive_reduce(g: SequenceGraph) -> SequenceGraph:
    """Remove every edge implied by a longer path (unique for DAGs)."""
    g.check_acyclic()
    adj = {u: set(vs) for u, vs in g.edges.items()}
    for u in sorted(adj):
        for v in sorted(adj[u]):
            adj[u].discard(v)
            if not _rows_reachable(adj, u, v):
                adj[u].add(v)
    reduced = SequenceGraph(
        edges={u: vs for u, vs in adj.items() if vs},
        timestep=dict(g.timestep),
        support={(u, v): s for (u, v), s in g.support.items()
                 if v in adj.get(u, ())},
        names=dict(g.names),
        dropped_weight=g.dropped_weight,
        total_weight=g.total_weight,
    )
    return reduced


def load_labels(path: str | Path) -> dict[tuple[str, str], dict[str, str]]:
    """Read a line-delimited (source, target, judge, label) file."""
    labels: dict[tuple[str, str], dict[str, str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.rstrip("\n")
            if not raw or raw.startswith("#"):
                continue
            parts = raw.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{line_no}: expected 4 tab-separated fields")
            source, target, judge, label = (p.strip() for p in parts)
            if label not in ("1", "0", "X"):
                raise ValueError(f"{path}:{line_no}: label must be one of 1, 0, X")
            labels.setdefault((source, target), {})[judge] = label
    return labels


@dataclass(frozen=True)
class ScoreReport:
    weighted: float
    weighted_bounds: tuple[float, float]
    simple_majority: float
    majority_bounds: tuple[float, float]
    n_edges: int
    n_judges: int

    def to_dict(self) -> dict:
        return {
            "weighted": self.weighted,
            "weighted_bounds": list(self.weighted_bounds),
            "simple_majority": self.simple_majority,
            "majority_bounds": list(self.majority_bounds),
            "n_edges": self.n_edges,
            "n_judges": self.n_judges,
        }


def score(g: SequenceGraph, labels: Mapping[tuple[str, str], Mapping[str, str]]) -> ScoreReport:
    """Accuracy of eligible edges against judge labels, with X bounds.

    Eligible edges neither originate from START nor end at TERMINATE. The
    weighted score is the mean of all labels; the simple-majority score is
    the fraction of edges whose per-judge majority is 1. Unsure labels (X)
    are globally replaced by 0 and by 1 to obtain the lower and upper
    bounds, as are exact 1-0 judge ties in the majority score; the headline
    value is the midpoint of its bounds. Scores are percentages.
    """
    eligible = [
        (g.name_of(u), g.name_of(v))
        for u, v in g.edge_list()
        if u != START and v != TERMINATE
    ]
    judges: set[str] = set()
    for edge in eligible:
        judges.update(labels.get(edge, {}))
    judges_sorted = sorted(judges)
    if eligible and not judges_sorted:
        raise MissingLabel(f"no labels for any of {len(eligible)} eligible edges")

    grid: list[list[str]] = []
    for edge in eligible:
        row = []
        per_edge = labels.get(edge, {})
        for judge in judges_sorted:
            if judge not in per_edge:
                raise MissingLabel(f"edge {edge[0]} -> {edge[1]} lacks a label from judge {judge!r}")
            row.append(per_edge[judge])
        grid.append(row)

    def weighted_with(x_value: int) -> float:
        values = [x_value if lab == "X" else int(lab) for row in grid for lab in row]
        return 100.0 * (sum(values) / len(values)) if values else 100.0

    def majority_with(x_value: int, tie_value: int) -> float:
        if not grid:
            return 100.0
        wins = 0
        for row in grid:
            votes = [x_value if lab == "X" else int(lab) for lab in row]
            ones = sum(votes)
            zeros = len(votes) - ones
            if ones > zeros:
                wins += 1
            elif ones == zeros:
                wins += tie_value
        return 100.0 * wins / len(grid)

    w_low, w_high = weighted_with(0), weighted_with(1)
    m_low, m_high = majority_with(0, 0), majority_with(1, 1)
    return ScoreReport(
        weighted=(w_low + w_high) / 2.0,
        weighted_bounds=(w_low, w_high),
        simple_majority=(m_low + m_high) / 2.0,
        majority_bounds=(m_low, m_high),
        n_edges=len(eligible),
        n_judges=len(judges_sorted),
    )


def write_sequence_records(g: SequenceGraph, path: str | Path) -> None:
    """Line-delimited sequence export: nodes with timesteps, then edges."""
    with open(path, "w", encoding="utf-8") as fh:
        meta = {"type": "meta", "dropped_weight": g.dropped_weight,
                "total_weight": g.total_weight}
        fh.write(json.dumps(meta, ensure_ascii=False, sort_keys=True) + "\n")
        for node in g.nodes():
            rec = {"type": "node", "name": g.name_of(node),
                   "timestep": g.timestep.get(node)}
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
        for u, v in g.edge_list():
            rec = {"type": "edge", "source": g.name_of(u), "target": g.name_of(v),
                   "support": g.support.get((u, v), 0)}
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_sequence_records(path: str | Path) -> SequenceGraph:
    g = SequenceGraph()
    name_to_id: dict[str, int] = {START_NAME: START, TERMINATE_NAME: TERMINATE}

    def node_id(name: str) -> int:
        if name not in name_to_id:
            new_id = max((i for i in name_to_id.values() if i >= 0), default=-1) + 1
            name_to_id[name] = new_id
            g.names[new_id] = name
        return name_to_id[name]

    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            obj = json.loads(raw)
            if obj["type"] == "meta":
                g.dropped_weight = obj["dropped_weight"]
                g.total_weight = obj["total_weight"]
            elif obj["type"] == "node":
                nid = node_id(obj["name"])
                if obj.get("timestep") is not None:
                    g.timestep[nid] = obj["timestep"]
                g.edges.setdefault(nid, set())
            elif obj["type"] == "edge":
                u, v = node_id(obj["source"]), node_id(obj["target"])
                g.edges.setdefault(u, set()).add(v)
                g.support[(u, v)] = obj.get("support", 0)
    g.edges = {u: vs for u, vs in g.edges.items() if vs}
    return g


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def sequence_to_dot(
    g: SequenceGraph,
    path: str | Path | None = None,
    *,
    flag_degree: int = 2,
    flag_support: int = 2,
) -> str:
    """DOT export ranked by timestep: START on top, TERMINATE at the bottom.

    Nodes of degree above `flag_degree` are shaded, edges supported by at
    least `flag_support` distinct reviews are highlighted.
    """
    lines = ["digraph sequence {", "  rankdir=TB;"]
    nodes = g.nodes()
    by_step: dict[int, list[int]] = {}
    for node in nodes:
        by_step.setdefault(g.timestep.get(node, 0), []).append(node)
    for node in nodes:
        attrs = [f"label={_quote(g.name_of(node))}"]
        if g.degree(node) > flag_degree:
            attrs.append('style=filled, fillcolor="turquoise"')
        lines.append(f"  {_quote(g.name_of(node))} [{', '.join(attrs)}];")
    for step in sorted(by_step):
        same = " ".join(_quote(g.name_of(n)) for n in sorted(by_step[step]))
        lines.append(f"  {{ rank=same; {same} }}")
    for u, v in g.edge_list():
        attrs = []
        if g.support.get((u, v), 0) >= flag_support:
            attrs.append('color="red"')
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  {_quote(g.name_of(u))} -> {_quote(g.name_of(v))}{suffix};")
    lines.append("}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
