from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import torch

from ..decoding import DecodeConfig, GenerationCandidate, beam_search, best_n_select, coverage_score
from ..extraction import ConceptSet
from ..tagging import Lemmatizer, Tagger
from .batching import Batch, Example, collate
from .network import Mode, Seq2SeqTransformer
from .vocab import Vocab


class ModelStepper:
    """Expose a trained model through the beam-search ``StepModel`` protocol.

    Each call appends ``[MASK]`` to every prefix and reads the model's
    prediction at that slot, as in UniLM decoding.
    """

    def __init__(self, model: Seq2SeqTransformer, vocab: Vocab, mode: Mode = "inject"):
        self.model = model
        self.vocab = vocab
        self.mode = mode
        self.eos_id = vocab.eos_id
        self._banned = [i for i in vocab.special_ids if i != vocab.eos_id]

    @torch.no_grad()
    def log_probs(self, source: Batch, prefixes: Sequence[tuple[int, ...]]) -> np.ndarray:
        n = len(prefixes)
        tgt = torch.tensor([list(p) + [self.vocab.mask_id] for p in prefixes], dtype=torch.long)
        batch = source.repeat(n).with_target(tgt)
        logits = self.model(batch, self.mode)[:, -1].double()
        logits[:, self._banned] = float("-inf")
        return torch.log_softmax(logits, dim=-1).numpy()


@dataclass
class GenerationResult:
    sample_id: Optional[str]
    concept_set: ConceptSet
    selected: GenerationCandidate
    candidates: list[GenerationCandidate]

    @property
    def sentence(self) -> str:
        return " ".join(self.selected.tokens)

    @property
    def top_beam(self) -> GenerationCandidate:
        return self.candidates[0]

    def to_json(self) -> dict:
        return {
            "id": self.sample_id,
            "sentence": self.sentence,
            "beam_score": self.selected.beam_score,
            "coverage": self.selected.coverage,
            "all_candidates": [
                {"sentence": " ".join(c.tokens), "beam_score": c.beam_score, "coverage": c.coverage}
                for c in self.candidates
            ],
        }


def generate(
    model: Seq2SeqTransformer,
    vocab: Vocab,
    example: Example,
    config: DecodeConfig,
    mode: Mode = "inject",
    tagger: Optional[Tagger] = None,
    matcher: Optional[Lemmatizer] = None,
) -> GenerationResult:
    """Beam-search one example and pick the output with Best-N scoring."""
    if config.max_len > model.config.max_target_len:
        raise ValueError("max_len exceeds the model's max_target_len")
    model.eval()
    source = collate([example], vocab, model.config)
    raw = beam_search(ModelStepper(model, vocab, mode), source, config)
    cs = example.concept_set
    words = []
    for cand in raw:
        tokens = tuple(vocab.decode(cand.tokens))
        cov = coverage_score(tokens, cs, tagger, matcher)
        words.append(replace(cand, tokens=tokens, coverage=cov))
    selected = best_n_select(words, cs, tagger, matcher)
    return GenerationResult(example.sample_id, cs, selected, words)
