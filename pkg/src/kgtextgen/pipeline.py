"""Glue from concept sets to model-ready examples."""

from __future__ import annotations

from typing import Mapping, Optional, Sequence

from .extraction import ConceptSet, KnowledgePath, SelectionConfig, expand_query, extract_multihop, select
from .kg_store import Concept, KnowledgeGraph
from .linearize import linearize_path
from .model.batching import Example, build_example
from .model.network import Mode
from .model.vocab import Vocab


def knowledge_for(
    graph: KnowledgeGraph,
    cs: ConceptSet,
    selection: SelectionConfig = SelectionConfig(),
    priors: Optional[Mapping[str, float]] = None,
    k_fallback: int = 5,
) -> list[KnowledgePath]:
    return select(extract_multihop(graph, cs, k_fallback), cs, selection, priors)


def make_examples(
    concept_sets: Sequence[ConceptSet],
    mode: Mode,
    paths: Optional[Mapping] = None,
    expansions: Optional[Mapping] = None,
    with_targets: bool = True,
) -> list[Example]:
    """One example per reference (or a single target-less example when ``with_targets`` is off).

    ``paths`` and ``expansions`` map sample ids to extracted knowledge
    paths and expansion concepts.
    """
    examples = []
    for cs in concept_sets:
        evidence = [linearize_path(p) for p in (paths or {}).get(cs.source_id, ())]
        expn: Sequence[Concept] = (expansions or {}).get(cs.source_id, ())
        targets = cs.references if (with_targets and cs.references) else (None,)
        for target in targets:
            examples.append(build_example(cs, target, evidence, expn, mode))
    return examples


def build_vocab(examples: Sequence[Example]) -> Vocab:
    """Vocabulary over sources, targets and evidence tokens of the training examples."""
    return Vocab.build(
        [e.source for e in examples] + [e.target for e in examples] + [t for e in examples for t in e.evidence]
    )


def prepare_knowledge(
    graph: KnowledgeGraph,
    concept_sets: Sequence[ConceptSet],
    selection: SelectionConfig = SelectionConfig(),
    priors: Optional[Mapping[str, float]] = None,
    max_expansions: Optional[int] = 0,
) -> tuple[dict, dict]:
    """Selected paths and expansion concepts keyed by sample id."""
    paths = {cs.source_id: knowledge_for(graph, cs, selection, priors) for cs in concept_sets}
    expansions = {}
    if max_expansions != 0:
        expansions = {cs.source_id: expand_query(graph, cs, max_expansions) for cs in concept_sets}
    return paths, expansions
