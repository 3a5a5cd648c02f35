"""Turn knowledge paths into plain evidence sentences."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Literal, Optional

from .kg_store import Concept
from .extraction import KnowledgePath

MaskRole = Literal["given_concept_evidence", "expansion_concept"]

_CAMEL_RE = re.compile(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


def humanize_relation(relation: str) -> str:
    """``AtLocation`` -> ``at location``; ``dbpedia/genre`` -> ``dbpedia genre``."""
    words = re.split(r"[/_\s]+", _CAMEL_RE.sub(" ", relation))
    return " ".join(w.lower() for w in words if w)


def concept_words(concept: Concept | str) -> str:
    label = concept.label if isinstance(concept, Concept) else concept
    return " ".join(label.split("_"))


@dataclass(frozen=True)
class EvidenceSentence:
    text: str
    source_path: Optional[KnowledgePath] = None
    mask_role: MaskRole = "given_concept_evidence"

    def __post_init__(self):
        if not self.text or self.text != " ".join(self.text.lower().split()):
            raise ValueError(f"evidence text must be non-empty, lowercase, single-spaced: {self.text!r}")

    @property
    def tokens(self) -> list[str]:
        return self.text.split(" ")


def linearize_path(path: KnowledgePath, mask_role: MaskRole = "given_concept_evidence") -> EvidenceSentence:
    parts = [concept_words(path.nodes[0])]
    for relation, node in zip(path.relations, path.nodes[1:]):
        parts += [humanize_relation(relation), concept_words(node)]
    return EvidenceSentence(" ".join(" ".join(parts).lower().split()), path, mask_role)


def linearize_all(paths) -> list[EvidenceSentence]:
    return [linearize_path(p) for p in paths]
