"""Multi-hop relation extraction, knowledge selection and query expansion."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Optional, Sequence

import numpy as np

from .kg_store import POS_TAGS, Concept, Edge, KnowledgeGraph, normalize_label

DEFAULT_EXCLUDED_RELATIONS = frozenset({"FormOf", "DerivedFrom", "Antonym", "DistinctFrom"})

Strategy = Literal["none", "random_subset", "prior_subset"]


@dataclass(frozen=True)
class ConceptSet:
    """Ordered, POS-tagged generation constraint."""

    items: tuple[Concept, ...]
    source_id: Optional[str] = None
    references: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "references", tuple(self.references))
        if len(self.items) < 2:
            raise ValueError("a concept set needs at least two concepts")
        for item in self.items:
            if item.pos is None:
                raise ValueError(f"concept {item.label!r} has no POS tag")
        labels = self.labels
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate concept labels in {labels}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.items)

    def pos_of(self, label: str) -> Optional[str]:
        for c in self.items:
            if c.label == label:
                return c.pos
        return None

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def to_commongen(self) -> str:
        return "#".join(f"{c.label}_{c.pos}" for c in self.items)

    def to_json(self) -> dict:
        record = {"id": self.source_id, "concepts": [{"label": c.label, "pos": c.pos} for c in self.items]}
        record["references"] = list(self.references)
        return record

    @classmethod
    def from_json(cls, record: Mapping) -> "ConceptSet":
        items = [Concept(normalize_label(c["label"]), c["pos"]) for c in record["concepts"]]
        return cls(tuple(items), record.get("id"), tuple(record.get("references", ())))


def parse_commongen(line: str, source_id: Optional[str] = None, strict: bool = True) -> ConceptSet:
    """Parse the ``drill_N#field_N#run_V#team_N`` format.

    With ``strict`` the CommonGen size limits (3 to 5 concepts) apply.
    """
    items = []
    for token in line.strip().split("#"):
        label, sep, pos = token.rpartition("_")
        if not sep or pos not in POS_TAGS or not label:
            raise ValueError(f"bad concept token {token!r}")
        items.append(Concept(normalize_label(label), pos))
    if strict and not 3 <= len(items) <= 5:
        raise ValueError(f"CommonGen concept sets have 3-5 items, got {len(items)}")
    return ConceptSet(tuple(items), source_id)


def read_concept_sets(path) -> list[ConceptSet]:
    """Read concept sets from JSON lines or plain CommonGen lines."""
    sets = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("{"):
                record = json.loads(line)
                if record.get("kind") == "header":
                    continue
                sets.append(ConceptSet.from_json(record))
            else:
                sets.append(parse_commongen(line, source_id=str(lineno)))
    return sets


@dataclass(frozen=True)
class KnowledgePath:
    """A 1-3 hop chain ``[C1, r1, C2, (r2, C3, (r3, C4))]``.

    ``nodes`` are listed in traversal order; each relation keeps the
    orientation of the stored edge, recorded in ``forward``.
    """

    nodes: tuple[Concept, ...]
    relations: tuple[str, ...]
    weights: tuple[float, ...]
    forward: tuple[bool, ...] = ()

    def __post_init__(self):
        n = len(self.relations)
        if not 1 <= n <= 3:
            raise ValueError(f"paths have 1-3 hops, got {n}")
        if len(self.nodes) != n + 1 or len(self.weights) != n:
            raise ValueError("nodes, relations and weights are misaligned")
        if not self.forward:
            object.__setattr__(self, "forward", (True,) * n)
        elif len(self.forward) != n:
            raise ValueError("forward flags are misaligned")

    @property
    def hop_count(self) -> int:
        return len(self.relations)

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.nodes[0].label, self.nodes[-1].label)

    @property
    def hops(self) -> tuple:
        """Alternating concept/relation sequence."""
        seq: list = [self.nodes[0]]
        for rel, node in zip(self.relations, self.nodes[1:]):
            seq += [rel, node]
        return tuple(seq)

    @property
    def weight(self) -> float:
        """Bottleneck strength: the weakest hop."""
        return min(self.weights)

    @property
    def dedup_key(self):
        return (frozenset(self.endpoints), self.hops)

    @property
    def sort_key(self):
        return (self.hop_count, tuple(n.sort_key for n in self.nodes), self.relations)

    def labels(self) -> list:
        """Hops with bare labels, e.g. ``['cheese', 'AtLocation', 'pizza']``."""
        return [h.label if isinstance(h, Concept) else h for h in self.hops]

    def reversed(self) -> "KnowledgePath":
        return KnowledgePath(self.nodes[::-1], self.relations[::-1], self.weights[::-1], tuple(not f for f in self.forward[::-1]))

    def edges(self) -> list[Edge]:
        out = []
        for i, rel in enumerate(self.relations):
            a, b = self.nodes[i], self.nodes[i + 1]
            head, tail = (a, b) if self.forward[i] else (b, a)
            out.append(Edge(head, rel, tail, self.weights[i]))
        return out

    def to_json(self) -> dict:
        return {
            "nodes": [{"label": n.label, "pos": n.pos} for n in self.nodes],
            "relations": list(self.relations),
            "weights": list(self.weights),
            "forward": list(self.forward),
        }

    @classmethod
    def from_json(cls, record: Mapping) -> "KnowledgePath":
        return cls(
            tuple(Concept(n["label"], n["pos"]) for n in record["nodes"]),
            tuple(record["relations"]),
            tuple(float(w) for w in record["weights"]),
            tuple(record.get("forward", ())),
        )

    @classmethod
    def from_edges(cls, start: str, edges: Sequence[Edge]) -> "KnowledgePath":
        """Chain ``edges`` starting at label ``start``, following either direction."""
        nodes, forward = [], []
        current = start
        for edge in edges:
            if edge.head.label == current:
                nodes.append(edge.head)
                forward.append(True)
                current = edge.tail.label
            elif edge.tail.label == current:
                nodes.append(edge.tail)
                forward.append(False)
                current = edge.head.label
            else:
                raise ValueError(f"edge {edge} does not continue from {current!r}")
        last = edges[-1]
        nodes.append(last.tail if forward[-1] else last.head)
        return cls(tuple(nodes), tuple(e.relation for e in edges), tuple(e.weight for e in edges), tuple(forward))


@dataclass(frozen=True)
class SelectionConfig:
    excluded_relation_types: frozenset = DEFAULT_EXCLUDED_RELATIONS
    pos_constrained: bool = True
    strategy: Strategy = "none"
    random_p: float = 0.5
    prior_threshold: float = 0.9
    seed: int = 0
    at_least_one_per_concept: bool = True

    def __post_init__(self):
        object.__setattr__(self, "excluded_relation_types", frozenset(self.excluded_relation_types))
        if not 0.0 <= self.random_p <= 1.0:
            raise ValueError(f"random_p must lie in [0, 1], got {self.random_p}")
        if self.strategy not in ("none", "random_subset", "prior_subset"):
            raise ValueError(f"unknown selection strategy {self.strategy!r}")


def _dedup(paths: Iterable[KnowledgePath]) -> list[KnowledgePath]:
    best: dict = {}
    for path in paths:
        prev = best.get(path.dedup_key)
        if prev is None or path.weights > prev.weights:
            best[path.dedup_key] = path
    return sorted(best.values(), key=lambda p: p.sort_key)


def _adjacency(graph: KnowledgeGraph, label: str) -> dict[str, list[Edge]]:
    adj: dict[str, list[Edge]] = defaultdict(list)
    for edge in graph.neighbors(label, direction="both"):
        other = edge.other(label).label
        if other != label:
            adj[other].append(edge)
    return adj


def extract_multihop(graph: KnowledgeGraph, cs: ConceptSet, k_fallback: int = 5) -> list[KnowledgePath]:
    """Collect the knowledge paths linking pairs of concept-set labels.

    Every 1-hop and 2-hop simple path between two distinct labels is
    returned, traversing edges in either direction. A label left with no
    such path gets 3-hop paths whose first intermediate is one of its
    ``k_fallback`` strongest neighbors. Paths are oriented from the
    earlier concept-set label to the later one, except 3-hop paths, which
    start at the poorly connected label (the earlier one if both are).
    """
    labels = cs.labels
    adj = {label: _adjacency(graph, label) for label in labels}
    found: list[KnowledgePath] = []
    connected: set[str] = set()

    for i, a in enumerate(labels):
        for b in labels[i + 1 :]:
            for edge in adj[a].get(b, ()):
                found.append(KnowledgePath.from_edges(a, [edge]))
            for mid in sorted(adj[a].keys() & adj[b].keys()):
                if mid in (a, b):
                    continue
                for first in adj[a][mid]:
                    for second in adj[b][mid]:
                        found.append(KnowledgePath.from_edges(a, [first, second]))
    for path in found:
        connected.update(path.endpoints)

    order = {label: i for i, label in enumerate(labels)}
    for a in labels:
        if a in connected:
            continue
        for root in graph.top_k_neighbors(a, k_fallback):
            mid1 = root.label
            if mid1 in labels:
                continue
            adj_mid1 = _adjacency(graph, mid1)
            for b in labels:
                if b == a:
                    continue
                for mid2 in sorted(adj_mid1.keys() & adj[b].keys()):
                    if mid2 in (a, b, mid1):
                        continue
                    for e1 in adj[a][mid1]:
                        for e2 in adj_mid1[mid2]:
                            for e3 in adj[b][mid2]:
                                path = KnowledgePath.from_edges(a, [e1, e2, e3])
                                # both ends poorly connected: orient as for 1/2-hop paths
                                if b not in connected and order[b] < order[a]:
                                    path = path.reversed()
                                found.append(path)
    return _dedup(found)


def filter_relations(paths: Sequence[KnowledgePath], config: SelectionConfig, cs: ConceptSet) -> list[KnowledgePath]:
    """Drop paths with excluded relation types or contradicting POS tags.

    A path contradicts the concept set when a node carrying a concept-set
    label is tagged in the graph with a different POS. Untagged graph
    nodes never contradict.
    """
    kept = []
    for path in paths:
        if any(rel in config.excluded_relation_types for rel in path.relations):
            continue
        if config.pos_constrained and any(
            node.pos is not None and cs.pos_of(node.label) not in (None, node.pos) for node in path.nodes
        ):
            continue
        kept.append(path)
    return kept


def _repair(inputs: Sequence[KnowledgePath], keep: list[bool], config: SelectionConfig) -> list[KnowledgePath]:
    if config.at_least_one_per_concept:
        covered = set()
        for path, k in zip(inputs, keep):
            if k:
                covered.update(path.endpoints)
        best: dict[str, int] = {}
        for idx, path in enumerate(inputs):
            for label in path.endpoints:
                if label in covered:
                    continue
                cur = best.get(label)
                if cur is None or _representative_key(path) < _representative_key(inputs[cur]):
                    best[label] = idx
        for idx in best.values():
            keep[idx] = True
    return [path for path, k in zip(inputs, keep) if k]


def _representative_key(path: KnowledgePath):
    return (-path.weight, path.sort_key)


def representatives(paths: Sequence[KnowledgePath]) -> list[KnowledgePath]:
    """The highest-weight path for each endpoint label, in input order."""
    return _repair(paths, [False] * len(paths), SelectionConfig(at_least_one_per_concept=True))


def random_subset(paths: Sequence[KnowledgePath], config: SelectionConfig) -> list[KnowledgePath]:
    """Keep each path with probability ``random_p``, then repair coverage.

    The output preserves input order. With ``at_least_one_per_concept``,
    any endpoint label that lost all its paths gets its highest-weight
    path back.
    """
    rng = np.random.default_rng(config.seed)
    draws = rng.random(len(paths))
    keep = [bool(u < config.random_p) for u in draws]
    return _repair(paths, keep, config)


def compute_priors(corpus_paths: Iterable[KnowledgePath]) -> dict[str, float]:
    """Relation-type frequencies over every hop in the corpus."""
    counts = Counter()
    for path in corpus_paths:
        counts.update(path.relations)
    total = sum(counts.values())
    if total == 0:
        raise ValueError("cannot compute priors from an empty corpus")
    return {rel: n / total for rel, n in sorted(counts.items())}


def path_prior(path: KnowledgePath, priors: Mapping[str, float]) -> float:
    return max(priors.get(rel, 0.0) for rel in path.relations)


def prior_subset(
    paths: Sequence[KnowledgePath], priors: Mapping[str, float], config: SelectionConfig
) -> list[KnowledgePath]:
    """Keep a path when its relation prior plus a uniform draw beats the threshold."""
    rng = np.random.default_rng(config.seed)
    draws = rng.random(len(paths))
    keep = [bool(path_prior(p, priors) + u > config.prior_threshold) for p, u in zip(paths, draws)]
    return _repair(paths, keep, config)


def rank_by_length_and_frequency(
    paths: Sequence[KnowledgePath], priors: Optional[Mapping[str, float]] = None
) -> list[KnowledgePath]:
    """Shorter paths first, then paths whose relation types are more frequent."""
    priors = priors or {}
    return sorted(paths, key=lambda p: (p.hop_count, -path_prior(p, priors), p.sort_key))


def select(
    paths: Sequence[KnowledgePath],
    cs: ConceptSet,
    config: SelectionConfig,
    priors: Optional[Mapping[str, float]] = None,
) -> list[KnowledgePath]:
    """Filter, then apply the configured subset strategy."""
    paths = filter_relations(paths, config, cs)
    if config.strategy == "random_subset":
        return random_subset(paths, config)
    if config.strategy == "prior_subset":
        if priors is None:
            raise ValueError("prior_subset selection needs relation priors")
        return prior_subset(paths, priors, config)
    return list(paths)


def expand_query(graph: KnowledgeGraph, cs: ConceptSet, max_expansions: Optional[int] = None) -> list[Concept]:
    """Neighbors shared by more than half of the concept set, most shared first."""
    if max_expansions is not None and max_expansions < 0:
        raise ValueError("max_expansions must be non-negative")
    labels = set(cs.labels)
    counts: Counter = Counter()
    pos_votes: dict[str, Counter] = defaultdict(Counter)
    for label in cs.labels:
        seen = set()
        for edge in graph.neighbors(label, direction="both"):
            other = edge.other(label)
            if other.label in labels or other.label in seen:
                continue
            seen.add(other.label)
            counts[other.label] += 1
            if other.pos is not None:
                pos_votes[other.label][other.pos] += 1
    ranked = sorted(((n, c) for n, c in counts.items() if c > len(cs) / 2), key=lambda item: (-item[1], item[0]))
    if max_expansions is not None:
        ranked = ranked[:max_expansions]
    out = []
    for label, _ in ranked:
        votes = pos_votes.get(label)
        pos = min(votes.items(), key=lambda kv: (-kv[1], kv[0]))[0] if votes else None
        out.append(Concept(label, pos))
    return out


@dataclass
class ExtractionStats:
    avg_relations: float
    concept_coverage: float
    n_samples: int = 0
    per_sample_counts: list = field(default_factory=list)


def extraction_stats(per_sample_paths: Sequence[Sequence[KnowledgePath]], concept_sets: Sequence[ConceptSet]) -> ExtractionStats:
    """Mean path count per sample and the share of concepts touched by a path."""
    if len(per_sample_paths) != len(concept_sets):
        raise ValueError("paths and concept sets are not aligned")
    if not concept_sets:
        return ExtractionStats(0.0, 0.0, 0, [])
    counts = [len(paths) for paths in per_sample_paths]
    total = covered = 0
    for paths, cs in zip(per_sample_paths, concept_sets):
        touched = set()
        for path in paths:
            touched.update(path.endpoints)
        total += len(cs)
        covered += sum(1 for label in cs.labels if label in touched)
    return ExtractionStats(float(np.mean(counts)), covered / total, len(counts), counts)


def write_paths_jsonl(path, concept_sets: Sequence[ConceptSet], per_sample_paths, header: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"kind": "header", **header}, sort_keys=True) + "\n")
        for cs, paths in zip(concept_sets, per_sample_paths):
            record = {"id": cs.source_id, "concepts": cs.to_json()["concepts"], "paths": [p.to_json() for p in paths]}
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_paths_jsonl(path) -> dict[Optional[str], list[KnowledgePath]]:
    """Map sample id to its extracted paths."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("kind") == "header":
                continue
            out[record["id"]] = [KnowledgePath.from_json(p) for p in record["paths"]]
    return out
