"""Example construction and collation for the seq2seq model."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import torch

from ..extraction import ConceptSet
from ..kg_store import Concept
from ..linearize import EvidenceSentence, concept_words
from ..tagging import tokenize
from .network import ModelConfig, Mode
from .vocab import CLS, EOS, SEP, Vocab

logger = logging.getLogger(__name__)


@dataclass
class Example:
    """One tokenized sample, still as strings."""

    source: list[str]
    given: list[bool]
    expansion: list[bool]
    target: list[str]
    evidence: list[list[str]] = field(default_factory=list)
    concept_set: Optional[ConceptSet] = None
    sample_id: Optional[str] = None


def build_example(
    cs: ConceptSet,
    target: Optional[str] = None,
    evidence: Sequence[EvidenceSentence] = (),
    expansions: Sequence[Concept] = (),
    mode: Mode = "inject",
) -> Example:
    """Lay out ``[CLS] concepts (expansions) [SEP]`` plus the target sentence.

    ``concat`` mode appends expansion concepts and evidence tokens to the
    source; ``inject`` mode appends expansion concepts (flagged so the
    injection mask skips them) and keeps the evidence separate;
    ``baseline`` uses the concepts alone.
    """
    source, given, expansion = [CLS], [False], [False]
    for concept in cs:
        words = concept_words(concept).split()
        source += words
        given += [True] * len(words)
        expansion += [False] * len(words)
    if mode in ("concat", "inject"):
        for concept in expansions:
            words = concept_words(concept).split()
            source += words
            given += [False] * len(words)
            expansion += [True] * len(words)
    if mode == "concat":
        for sentence in evidence:
            source += sentence.tokens
            given += [False] * len(sentence.tokens)
            expansion += [False] * len(sentence.tokens)
    source.append(SEP)
    given.append(False)
    expansion.append(False)
    ev = [s.tokens for s in evidence] if mode == "inject" else []
    tgt = tokenize(target) + [EOS] if target is not None else []
    return Example(source, given, expansion, tgt, ev, cs, cs.source_id)


@dataclass
class Batch:
    src_ids: torch.Tensor
    src_pad: torch.Tensor
    given: torch.Tensor
    expansion: torch.Tensor
    tgt_ids: torch.Tensor
    tgt_pad: torch.Tensor
    evidence_ids: torch.Tensor
    evidence_lens: torch.Tensor
    n_truncated: int = 0

    @property
    def size(self) -> int:
        return self.src_ids.shape[0]

    def with_target(self, tgt_ids: torch.Tensor, tgt_pad: Optional[torch.Tensor] = None) -> "Batch":
        if tgt_pad is None:
            tgt_pad = torch.zeros_like(tgt_ids, dtype=torch.bool)
        return Batch(self.src_ids, self.src_pad, self.given, self.expansion, tgt_ids, tgt_pad,
                     self.evidence_ids, self.evidence_lens, self.n_truncated)

    def repeat(self, n: int) -> "Batch":
        """Tile a single-sample batch ``n`` times (used for beams)."""
        def tile(t):
            return t.expand(n, *t.shape[1:]).contiguous()

        return Batch(tile(self.src_ids), tile(self.src_pad), tile(self.given), tile(self.expansion),
                     tile(self.tgt_ids), tile(self.tgt_pad), tile(self.evidence_ids), tile(self.evidence_lens),
                     self.n_truncated)


def _pad(rows: Sequence[Sequence], value, dtype, width: Optional[int] = None) -> torch.Tensor:
    width = max([len(r) for r in rows] + [0]) if width is None else width
    out = torch.full((len(rows), width), value, dtype=dtype)
    for i, row in enumerate(rows):
        if len(row):
            out[i, : len(row)] = torch.tensor(list(row), dtype=dtype)
    return out


def collate(examples: Sequence[Example], vocab: Vocab, config: ModelConfig) -> Batch:
    """Encode and pad examples, truncating to the configured limits.

    Evidence sentences longer than ``max_evidence_len`` are cut and
    counted in ``Batch.n_truncated``.
    """
    truncated = 0
    src, given, expn, tgt, ev_rows, ev_lens = [], [], [], [], [], []
    for ex in examples:
        if len(ex.source) > config.max_source_len:
            logger.warning("source of %s truncated to %d tokens", ex.sample_id, config.max_source_len)
        src.append(vocab.encode(ex.source[: config.max_source_len]))
        given.append(ex.given[: config.max_source_len])
        expn.append(ex.expansion[: config.max_source_len])
        tgt.append(vocab.encode(ex.target[: config.max_target_len]))
        sentences = ex.evidence[: config.max_evidence_sentences]
        if len(ex.evidence) > config.max_evidence_sentences:
            truncated += len(ex.evidence) - config.max_evidence_sentences
        rows, lens = [], []
        for tokens in sentences:
            if len(tokens) > config.max_evidence_len:
                truncated += 1
                tokens = tokens[: config.max_evidence_len]
            rows.append(vocab.encode(tokens))
            lens.append(len(tokens))
        ev_rows.append(rows)
        ev_lens.append(lens)
    if truncated:
        logger.debug("truncated %d evidence sentences", truncated)

    n_sent = max([len(r) for r in ev_rows] + [0])
    ev_len = max([l for ls in ev_lens for l in ls] + [0])
    evidence_ids = torch.full((len(examples), n_sent, ev_len), vocab.pad_id, dtype=torch.long)
    evidence_lens = torch.zeros((len(examples), n_sent), dtype=torch.long)
    for i, (rows, lens) in enumerate(zip(ev_rows, ev_lens)):
        for j, (row, n) in enumerate(zip(rows, lens)):
            if n:
                evidence_ids[i, j, :n] = torch.tensor(row, dtype=torch.long)
            evidence_lens[i, j] = n

    src_ids = _pad(src, vocab.pad_id, torch.long)
    tgt_ids = _pad(tgt, vocab.pad_id, torch.long)
    return Batch(
        src_ids=src_ids,
        src_pad=src_ids == vocab.pad_id,
        given=_pad(given, False, torch.bool, src_ids.shape[1]),
        expansion=_pad(expn, False, torch.bool, src_ids.shape[1]),
        tgt_ids=tgt_ids,
        tgt_pad=tgt_ids == vocab.pad_id,
        evidence_ids=evidence_ids,
        evidence_lens=evidence_lens,
        n_truncated=truncated,
    )
