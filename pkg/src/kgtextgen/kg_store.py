"""In-memory store for ConceptNet-style commonsense graphs.

Edges are kept directed exactly as they appear in the dump. Lookups are
by concept label, so ``run/v`` and ``run/n`` share an index bucket and are
told apart with a POS filter.
"""

from __future__ import annotations

import gzip
import io
import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Literal, Optional

logger = logging.getLogger(__name__)

POS_TAGS = ("N", "V", "A", "R")

# ConceptNet marks adjective satellites as "s"; they are folded into A.
_URI_POS = {"n": "N", "v": "V", "a": "A", "s": "A", "r": "R"}

_RELATION_RE = re.compile(r"^\S+$")

Direction = Literal["out", "in", "both"]


class DumpFormatError(ValueError):
    """A single dump row could not be parsed."""


def normalize_label(text: str) -> str:
    """Lowercase a surface term and join its words with underscores."""
    return "_".join(text.strip().lower().split())


@dataclass(frozen=True)
class Concept:
    label: str
    pos: Optional[str] = None

    def __post_init__(self):
        if not self.label or self.label != self.label.lower() or any(c.isspace() for c in self.label):
            raise ValueError(f"invalid concept label {self.label!r}")
        if self.pos is not None and self.pos not in POS_TAGS:
            raise ValueError(f"invalid POS tag {self.pos!r} for {self.label!r}")

    def __str__(self):
        return self.label if self.pos is None else f"{self.label}_{self.pos}"

    @property
    def sort_key(self) -> tuple[str, str]:
        return (self.label, self.pos or "")


@dataclass(frozen=True)
class Edge:
    head: Concept
    relation: str
    tail: Concept
    weight: float = 1.0

    def __post_init__(self):
        if not (self.weight >= 0.0):
            raise ValueError(f"edge weight must be non-negative, got {self.weight!r}")
        if not self.relation or not _RELATION_RE.match(self.relation):
            raise ValueError(f"invalid relation {self.relation!r}")

    @property
    def key(self) -> tuple[Concept, str, Concept]:
        return (self.head, self.relation, self.tail)

    @property
    def sort_key(self):
        return (self.head.sort_key, self.relation, self.tail.sort_key)

    def other(self, label: str) -> Concept:
        """The endpoint opposite to ``label`` (the tail for a self-loop)."""
        return self.tail if self.head.label == label else self.head


def parse_concept_uri(uri: str) -> tuple[str, Concept]:
    """Split ``/c/<lang>/<term>[/<pos>[/...]]`` into its language and concept.

    >>> parse_concept_uri("/c/en/run/v")
    ('en', Concept(label='run', pos='V'))
    """
    parts = uri.split("/")
    if len(parts) < 4 or parts[0] != "" or parts[1] != "c" or not parts[2] or not parts[3]:
        raise DumpFormatError(f"not a concept URI: {uri!r}")
    pos = _URI_POS.get(parts[4]) if len(parts) > 4 else None
    return parts[2], Concept(normalize_label(parts[3]), pos)


def format_concept_uri(concept: Concept, language: str = "en") -> str:
    uri = f"/c/{language}/{concept.label}"
    if concept.pos is not None:
        uri += "/" + concept.pos.lower()
    return uri


def parse_relation_uri(uri: str) -> str:
    if not uri.startswith("/r/") or len(uri) <= 3:
        raise DumpFormatError(f"not a relation URI: {uri!r}")
    return uri[3:]


def _parse_weight(text: str) -> float:
    try:
        weight = float(text)
    except ValueError as exc:
        raise DumpFormatError(f"bad weight {text!r}") from exc
    if not weight >= 0.0:
        raise DumpFormatError(f"bad weight {text!r}")
    return weight


def _parse_assertion(fields: list[str], language: Optional[str]) -> Optional[Edge]:
    relation = parse_relation_uri(fields[1])
    start_lang, head = parse_concept_uri(fields[2])
    end_lang, tail = parse_concept_uri(fields[3])
    try:
        meta = json.loads(fields[4]) if fields[4].strip() else {}
    except json.JSONDecodeError as exc:
        raise DumpFormatError("bad metadata JSON") from exc
    if not isinstance(meta, dict):
        raise DumpFormatError("metadata is not an object")
    weight = meta.get("weight", 1.0)
    if isinstance(weight, bool) or not isinstance(weight, (int, float)):
        raise DumpFormatError(f"bad weight {weight!r}")
    weight = _parse_weight(str(weight))
    if language is not None and (start_lang != language or end_lang != language):
        return None
    try:
        return Edge(head, relation, tail, weight)
    except ValueError as exc:
        raise DumpFormatError(str(exc)) from exc


def _parse_fixture_row(fields: list[str]) -> Edge:
    head, head_pos, relation, tail, tail_pos, weight = fields
    try:
        return Edge(
            Concept(normalize_label(head), None if head_pos == "-" else head_pos),
            relation,
            Concept(normalize_label(tail), None if tail_pos == "-" else tail_pos),
            _parse_weight(weight),
        )
    except ValueError as exc:
        raise DumpFormatError(str(exc)) from exc


def parse_row(line: str, language: Optional[str] = "en") -> Optional[Edge]:
    """Parse one dump row in either supported format.

    Returns ``None`` for rows dropped by the language filter and raises
    :class:`DumpFormatError` for malformed rows. Fixture rows carry no
    language and are never filtered.
    """
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) == 5 and fields[0].startswith("/a/"):
        return _parse_assertion(fields, language)
    if len(fields) == 6:
        return _parse_fixture_row(fields)
    raise DumpFormatError(f"expected 5 or 6 tab-separated fields, got {len(fields)}")


def _open_text(path: Path) -> io.TextIOBase:
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def _sort_key(edge: Edge, neighbor: Concept):
    return (-edge.weight, edge.relation, neighbor.sort_key, edge.sort_key)


class KnowledgeGraph:
    """Immutable, label-indexed collection of directed weighted edges.

    Duplicate ``(head, relation, tail)`` triples are merged, keeping the
    largest weight. All query methods are read-only and thread-safe.
    """

    def __init__(self, edges: Iterable[Edge] = ()):
        merged: dict[tuple, Edge] = {}
        for edge in edges:
            prev = merged.get(edge.key)
            if prev is None or edge.weight > prev.weight:
                merged[edge.key] = edge
        self._edges = tuple(sorted(merged.values(), key=lambda e: e.sort_key))
        out_index = defaultdict(list)
        in_index = defaultdict(list)
        for edge in self._edges:
            out_index[edge.head.label].append(edge)
            in_index[edge.tail.label].append(edge)
        self._out = {k: tuple(v) for k, v in out_index.items()}
        self._in = {k: tuple(v) for k, v in in_index.items()}

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self._edges

    @property
    def out_index(self) -> dict[str, tuple[Edge, ...]]:
        return dict(self._out)

    @property
    def in_index(self) -> dict[str, tuple[Edge, ...]]:
        return dict(self._in)

    def __len__(self):
        return len(self._edges)

    def __iter__(self) -> Iterator[Edge]:
        return iter(self._edges)

    def __eq__(self, other):
        return isinstance(other, KnowledgeGraph) and self._edges == other._edges

    def __hash__(self):
        return hash(self._edges)

    def __contains__(self, label: str) -> bool:
        return label in self._out or label in self._in

    def __repr__(self):
        return f"KnowledgeGraph({len(self._edges)} edges)"

    def labels(self) -> set[str]:
        return set(self._out) | set(self._in)

    def relation_types(self) -> set[str]:
        return {e.relation for e in self._edges}

    def neighbors(
        self,
        concept: str,
        pos_filter: Optional[str] = None,
        direction: Direction = "out",
    ) -> list[Edge]:
        """Edges incident to ``concept`` in the requested direction.

        With ``pos_filter`` set, an edge is kept when the endpoint matching
        ``concept`` is tagged with that POS or is untagged. Results are
        ordered by descending weight, then relation, then neighbor label.
        """
        if direction not in ("out", "in", "both"):
            raise ValueError(f"unknown direction {direction!r}")
        found: list[tuple[Edge, Concept]] = []
        if direction in ("out", "both"):
            for edge in self._out.get(concept, ()):
                if pos_filter is None or edge.head.pos in (None, pos_filter):
                    found.append((edge, edge.tail))
        if direction in ("in", "both"):
            for edge in self._in.get(concept, ()):
                if direction == "both" and edge.head.label == concept:
                    # self-loop already collected from the out side
                    continue
                if pos_filter is None or edge.tail.pos in (None, pos_filter):
                    found.append((edge, edge.head))
        found.sort(key=lambda item: _sort_key(*item))
        return [edge for edge, _ in found]

    def top_k_neighbors(self, concept: str, k: int, direction: Direction = "both") -> list[Concept]:
        """The ``k`` distinct neighbors with the strongest incident edge.

        Neighbors are distinct by label; each is reported with the POS of
        its strongest edge. Ties are broken by label.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        best: dict[str, tuple[float, Concept]] = {}
        for edge in self.neighbors(concept, direction=direction):
            other = edge.other(concept)
            if other.label == concept:
                continue
            # edges arrive strongest first, so the first sighting wins
            if other.label not in best:
                best[other.label] = (edge.weight, other)
        ranked = sorted(best.values(), key=lambda item: (-item[0], item[1].label))
        return [concept for _, concept in ranked[:k]]

    def write_fixture(self, fh, header: Optional[str] = None) -> None:
        """Write the graph in the plain six-column fixture format."""
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for edge in self._edges:
            fh.write(
                "\t".join(
                    [
                        edge.head.label,
                        edge.head.pos or "-",
                        edge.relation,
                        edge.tail.label,
                        edge.tail.pos or "-",
                        repr(float(edge.weight)),
                    ]
                )
                + "\n"
            )


def iter_dump(path, language: Optional[str] = "en") -> Iterator[tuple[int, Optional[Edge], Optional[str]]]:
    """Yield ``(line_number, edge_or_None, error_or_None)`` for each data row."""
    with _open_text(Path(path)) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                yield lineno, parse_row(line, language), None
            except DumpFormatError as exc:
                yield lineno, None, str(exc)


def load_dump(path, language: Optional[str] = "en") -> tuple[KnowledgeGraph, int]:
    """Load a ConceptNet assertions dump or a six-column fixture file.

    Gzip input is detected from the file header. Malformed rows are
    skipped and counted; rows outside ``language`` are dropped silently.

    Returns
    -------
    graph : KnowledgeGraph
    skipped : int
        Number of malformed rows.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dump not found: {path}")
    edges = []
    skipped = 0
    for lineno, edge, error in iter_dump(path, language):
        if error is not None:
            skipped += 1
            logger.debug("%s:%d skipped: %s", path, lineno, error)
        elif edge is not None:
            edges.append(edge)
    if skipped:
        logger.warning("%s: skipped %d malformed rows", path, skipped)
    return KnowledgeGraph(edges), skipped
