"""Character network construction and its metadiscursive expansion.

The regular graph has one node per character and one directed edge per
labeled relation cluster. Expansion ranks unmapped mentions by frequency,
links a candidate to a character only when more than `min_edge_support`
underlying tuples connect them, and admits the candidate only when it ends
up with at least `min_degree` distinct character neighbours.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .actants import MentionMap, RelationClusterSet, relational_tuples
from .ingest import ReviewCorpus, RelationTuple

__all__ = [
    "CHARACTER",
    "CANDIDATE",
    "GraphNode",
    "GraphEdge",
    "StoryGraph",
    "build_regular_graph",
    "rank_candidates",
    "expand_graph",
    "candidate_subnetwork",
    "write_graph_records",
    "read_graph_records",
    "graph_to_dot",
]

CHARACTER = "character"
CANDIDATE = "candidate"


@dataclass(frozen=True)
class GraphNode:
    id: str
    display: str
    kind: str


@dataclass(frozen=True)
class GraphEdge:
    source: str
    target: str
    labels: tuple[str, ...]
    support: int


@dataclass
class StoryGraph:
    nodes: dict[str, GraphNode] = field(default_factory=dict)
    edges: list[GraphEdge] = field(default_factory=list)

    def add_node(self, node: GraphNode) -> None:
        self.nodes.setdefault(node.id, node)

    def add_edge(self, edge: GraphEdge) -> None:
        if edge.source not in self.nodes or edge.target not in self.nodes:
            raise ValueError(f"edge {edge.source!r}->{edge.target!r} has a missing endpoint")
        if edge.support < 1:
            raise ValueError("edge support must be at least 1")
        self.edges.append(edge)

    def degree(self, node_id: str) -> int:
        """Number of distinct neighbours, parallel edges not counted twice."""
        neighbours = set()
        for e in self.edges:
            if e.source == node_id:
                neighbours.add(e.target)
            if e.target == node_id:
                neighbours.add(e.source)
        return len(neighbours)

    def copy(self) -> "StoryGraph":
        return StoryGraph(nodes=dict(self.nodes), edges=list(self.edges))


def build_regular_graph(
    cluster_sets: Sequence[RelationClusterSet],
    characters: dict[str, str],
) -> StoryGraph:
    """One node per character with an incident cluster, one edge per cluster."""
    g = StoryGraph()
    for cs in sorted(cluster_sets, key=lambda cs: cs.pair):
        real = [c for c in cs.clusters if not c.is_noise]
        if not real:
            continue
        s, o = cs.pair
        g.add_node(GraphNode(id=s, display=characters.get(s, s), kind=CHARACTER))
        g.add_node(GraphNode(id=o, display=characters.get(o, o), kind=CHARACTER))
        for c in sorted(real, key=lambda c: c.id):
            g.add_edge(GraphEdge(source=s, target=o, labels=(c.label,),
                                 support=len(c.members)))
    return g


def rank_candidates(corpus: ReviewCorpus, mention_map: MentionMap, top_k: int = 20) -> list[str]:
    """Most frequent mentions that resolve to no character, ties lexicographic."""
    if top_k <= 0:
        return []
    counts: Counter[str] = Counter()
    for t in relational_tuples(corpus):
        for head in (t.subject_head, t.object_head):
            mention = head.casefold()
            if mention_map.resolve(mention) is None:
                counts[mention] += 1
    ranked = sorted(counts, key=lambda m: (-counts[m], m))
    return ranked[:top_k]


def _tuples_between(corpus: ReviewCorpus, source: str, target: str,
                    mention_map: MentionMap | None = None) -> list[RelationTuple]:
    """Tuples whose subject head is `source` and whose object resolves to `target`.

    When a mention map is given, `target` is a character id and the object
    head is resolved through the map; otherwise both sides are matched as
    case-folded mention strings.
    """
    out = []
    for t in relational_tuples(corpus):
        if t.subject_head.casefold() != source:
            continue
        if mention_map is not None:
            if mention_map.resolve(t.object_head) == target:
                out.append(t)
        elif t.object_head.casefold() == target:
            out.append(t)
    return out


def _relation_labels(tuples: Sequence[RelationTuple]) -> tuple[str, ...]:
    seen: list[str] = []
    for t in tuples:
        phrase = (t.relation_lemma or t.relation_text).strip()
        if phrase not in seen:
            seen.append(phrase)
    return tuple(seen)


def expand_graph(
    g: StoryGraph,
    candidates: Sequence[str],
    corpus: ReviewCorpus,
    mention_map: MentionMap,
    min_edge_support: int = 5,
    min_degree: int = 3,
) -> StoryGraph:
    """Augment the regular graph with qualifying candidate nodes.

    An edge between a candidate and a character requires strictly more than
    `min_edge_support` underlying tuples; a candidate is admitted only when
    its resulting degree reaches `min_degree`, otherwise candidate and edges
    are discarded. Regular nodes and edges are never altered.
    """
    out = g.copy()
    characters = sorted({n.id for n in g.nodes.values() if n.kind == CHARACTER})
    for candidate in candidates:
        pending: list[GraphEdge] = []
        for char in characters:
            outward = [t for t in relational_tuples(corpus)
                       if t.subject_head.casefold() == candidate
                       and mention_map.resolve(t.object_head) == char]
            inward = [t for t in relational_tuples(corpus)
                      if mention_map.resolve(t.subject_head) == char
                      and t.object_head.casefold() == candidate]
            if len(outward) > min_edge_support:
                pending.append(GraphEdge(source=candidate, target=char,
                                         labels=_relation_labels(outward),
                                         support=len(outward)))
            if len(inward) > min_edge_support:
                pending.append(GraphEdge(source=char, target=candidate,
                                         labels=_relation_labels(inward),
                                         support=len(inward)))
        neighbours = {e.target if e.source == candidate else e.source for e in pending}
        if len(neighbours) >= min_degree:
            out.add_node(GraphNode(id=candidate, display=candidate, kind=CANDIDATE))
            for e in pending:
                out.add_edge(e)
    return out


def candidate_subnetwork(
    candidates: Sequence[str],
    corpus: ReviewCorpus,
    min_edge_support: int = 5,
) -> StoryGraph:
    """Graph over candidate mentions only, under the same support rule."""
    g = StoryGraph()
    for c in candidates:
        g.add_node(GraphNode(id=c, display=c, kind=CANDIDATE))
    for source in candidates:
        for target in candidates:
            if source == target:
                continue
            between = _tuples_between(corpus, source, target)
            if len(between) > min_edge_support:
                g.add_edge(GraphEdge(source=source, target=target,
                                     labels=_relation_labels(between),
                                     support=len(between)))
    return g


def write_graph_records(g: StoryGraph, path: str | Path) -> None:
    """Line-delimited node and edge records, sorted for determinism."""
    with open(path, "w", encoding="utf-8") as fh:
        for node_id in sorted(g.nodes):
            n = g.nodes[node_id]
            fh.write(json.dumps({"type": "node", "id": n.id, "display": n.display,
                                 "kind": n.kind}, ensure_ascii=False, sort_keys=True))
            fh.write("\n")
        for e in sorted(g.edges, key=lambda e: (e.source, e.target, e.labels)):
            fh.write(json.dumps({"type": "edge", "source": e.source, "target": e.target,
                                 "labels": list(e.labels), "support": e.support},
                                ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_graph_records(path: str | Path) -> StoryGraph:
    g = StoryGraph()
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            obj = json.loads(raw)
            if obj["type"] == "node":
                g.add_node(GraphNode(id=obj["id"], display=obj["display"], kind=obj["kind"]))
            elif obj["type"] == "edge":
                g.add_edge(GraphEdge(source=obj["source"], target=obj["target"],
                                     labels=tuple(obj["labels"]), support=obj["support"]))
    return g


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def graph_to_dot(g: StoryGraph, path: str | Path | None = None) -> str:
    lines = ["digraph story {"]
    for node_id in sorted(g.nodes):
        n = g.nodes[node_id]
        lines.append(f"  {_quote(n.id)} [label={_quote(n.display)}, kind={_quote(n.kind)}];")
    for e in sorted(g.edges, key=lambda e: (e.source, e.target, e.labels)):
        label = ";".join(e.labels)
        lines.append(
            f"  {_quote(e.source)} -> {_quote(e.target)} "
            f"[label={_quote(label)}, weight={e.support}];"
        )
    lines.append("}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
