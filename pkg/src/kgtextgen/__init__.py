"""Knowledge-grounded, lexically-constrained text generation toolkit."""

from .kg_store import Concept, Edge, KnowledgeGraph, load_dump
from .extraction import (
    ConceptSet,
    KnowledgePath,
    SelectionConfig,
    compute_priors,
    expand_query,
    extract_multihop,
    extraction_stats,
    filter_relations,
    parse_commongen,
    prior_subset,
    random_subset,
)
from .linearize import EvidenceSentence, linearize_path
from .decoding import (
    DecodeConfig,
    GenerationCandidate,
    beam_search,
    best_n_select,
    concept_presence,
    coverage_score,
)

__all__ = [
    "Concept",
    "Edge",
    "KnowledgeGraph",
    "load_dump",
    "ConceptSet",
    "KnowledgePath",
    "SelectionConfig",
    "compute_priors",
    "expand_query",
    "extract_multihop",
    "extraction_stats",
    "filter_relations",
    "parse_commongen",
    "prior_subset",
    "random_subset",
    "EvidenceSentence",
    "linearize_path",
    "DecodeConfig",
    "GenerationCandidate",
    "beam_search",
    "best_n_select",
    "concept_presence",
    "coverage_score",
]

__version__ = "0.1.0"
