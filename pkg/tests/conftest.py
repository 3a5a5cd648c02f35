from pathlib import Path

import numpy as np
import pytest

from kgtextgen.extraction import ConceptSet
from kgtextgen.kg_store import Concept, Edge, KnowledgeGraph, load_dump

FIXTURES = Path(__file__).parent / "fixtures"
RELATIONS = ("RelatedTo", "AtLocation", "IsA", "UsedFor")


def random_graph(rng: np.random.Generator, max_nodes: int = 50, max_edges: int = 200) -> KnowledgeGraph:
    """Small random multigraph with mixed/absent POS tags and occasional self-loops."""
    n = int(rng.integers(2, max_nodes + 1))
    m = int(rng.integers(1, max_edges + 1))
    pos_choices = ("N", "V", None)
    edges = [Edge(Concept("c0", "N"), "RelatedTo", Concept("c1", "N"), 1.0)]
    for _ in range(m - 1):
        h, t = rng.integers(0, n, size=2)
        edges.append(
            Edge(
                Concept(f"c{h}", pos_choices[rng.integers(3)]),
                RELATIONS[rng.integers(len(RELATIONS))],
                Concept(f"c{t}", pos_choices[rng.integers(3)]),
                float(rng.integers(1, 8)) / 2,
            )
        )
    return KnowledgeGraph(edges)


def random_concept_set(rng: np.random.Generator, graph: KnowledgeGraph, size: int | None = None) -> ConceptSet:
    labels = sorted(graph.labels())
    size = size or int(rng.integers(2, min(5, len(labels)) + 1))
    picked = rng.choice(len(labels), size=min(size, len(labels)), replace=False)
    return ConceptSet(tuple(Concept(labels[i], ("N", "V")[rng.integers(2)]) for i in sorted(picked)))


def cset(*items: str) -> ConceptSet:
    """``cset("dog_N", "run_V")``"""
    out = []
    for item in items:
        label, _, pos = item.rpartition("_")
        out.append(Concept(label, pos))
    return ConceptSet(tuple(out))


@pytest.fixture
def pizza_graph() -> KnowledgeGraph:
    return load_dump(FIXTURES / "pizza.tsv")[0]


@pytest.fixture
def expansion_graph() -> KnowledgeGraph:
    return load_dump(FIXTURES / "expansion.tsv")[0]


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS.values():
            terminalreporter.write_line(line)
