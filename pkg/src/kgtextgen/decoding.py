"""Beam search with Best-N rescoring under lexical constraints."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence

import numpy as np

from .extraction import ConceptSet
from .kg_store import Concept
from .tagging import Lemmatizer, LexiconTagger, SuffixLemmatizer, Tagger


class StepModel(Protocol):
    """Anything that scores next tokens for a batch of prefixes."""

    eos_id: int

    def log_probs(self, source, prefixes: Sequence[tuple[int, ...]]) -> np.ndarray:
        """Return a ``(len(prefixes), vocab)`` array of next-token log-probabilities."""
        ...


@dataclass(frozen=True)
class GenerationCandidate:
    tokens: tuple
    beam_score: float
    coverage: float = 0.0
    finished: bool = True
    step_log_probs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.beam_score > 1e-9:
            raise ValueError(f"beam score must be <= 0, got {self.beam_score}")
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError(f"coverage must lie in [0, 1], got {self.coverage}")


@dataclass(frozen=True)
class DecodeConfig:
    beam_width: int = 4
    best_n: int = 4
    max_len: int = 20
    length_normalize: bool = False

    def __post_init__(self):
        if self.beam_width < 1 or self.best_n < 1 or self.max_len < 1:
            raise ValueError("beam_width, best_n and max_len must be positive")
        if self.best_n > self.beam_width:
            raise ValueError(f"best_n ({self.best_n}) cannot exceed beam_width ({self.beam_width})")


def _final_score(total: float, length: int, config: DecodeConfig) -> float:
    return total / max(length, 1) if config.length_normalize else total


def beam_search(model: StepModel, source, config: DecodeConfig) -> list[GenerationCandidate]:
    """Return the ``best_n`` highest-scoring hypotheses, best first.

    A hypothesis ends when it emits ``model.eos_id`` (which is scored but
    not included in ``tokens``) or reaches ``max_len`` tokens. Ties are
    broken by token sequence so results are fully deterministic.
    """
    eos = model.eos_id
    alive: list[tuple[tuple[int, ...], tuple[float, ...], float]] = [((), (), 0.0)]
    finished: list[GenerationCandidate] = []

    for step in range(config.max_len):
        scores = np.asarray(model.log_probs(source, [a[0] for a in alive]), dtype=np.float64)
        expansions = []
        for (tokens, steps, total), row in zip(alive, scores):
            for tok in range(row.shape[0]):
                lp = float(row[tok])
                if lp == -np.inf:
                    continue
                expansions.append((total + lp, tokens + (tok,), steps + (lp,)))
        expansions.sort(key=lambda e: (-e[0], e[1]))

        next_alive = []
        last_step = step + 1 == config.max_len
        for total, tokens, steps in expansions:
            if len(next_alive) == config.beam_width:
                break
            if tokens[-1] == eos:
                finished.append(
                    GenerationCandidate(tokens[:-1], min(_final_score(total, len(tokens), config), 0.0), 0.0, True, steps)
                )
            elif last_step:
                finished.append(
                    GenerationCandidate(tokens, min(_final_score(total, len(tokens), config), 0.0), 0.0, False, steps)
                )
                next_alive.append((tokens, steps, total))
            else:
                next_alive.append((tokens, steps, total))
        if last_step:
            break
        alive = next_alive
        if not alive:
            break
        if not config.length_normalize and len(finished) >= config.beam_width:
            kth = sorted((c.beam_score for c in finished), reverse=True)[config.beam_width - 1]
            # raw scores only decrease, so no alive beam can overtake the top finished ones
            if max(a[2] for a in alive) < kth:
                break

    finished.sort(key=lambda c: (-c.beam_score, c.tokens))
    return finished[: config.best_n]


def greedy_decode(model: StepModel, source, max_len: int) -> GenerationCandidate:
    tokens: tuple[int, ...] = ()
    steps: tuple[float, ...] = ()
    for _ in range(max_len):
        row = np.asarray(model.log_probs(source, [tokens]), dtype=np.float64)[0]
        tok = int(np.argmax(row))
        steps += (float(row[tok]),)
        if tok == model.eos_id:
            return GenerationCandidate(tokens, sum(steps), 0.0, True, steps)
        tokens += (tok,)
    return GenerationCandidate(tokens, sum(steps), 0.0, False, steps)


def match_positions(tokens: Sequence[str], concept: Concept | str, matcher: Optional[Lemmatizer] = None) -> list[int]:
    """Start indices where the concept's words occur, compared by lemma.

    Multi-word labels (``ice_cream``) must match consecutive tokens.
    """
    matcher = matcher or _DEFAULT_LEMMATIZER
    label = concept.label if isinstance(concept, Concept) else concept
    want = [matcher.lemma(w) for w in label.split("_")]
    have = [matcher.lemma(t) for t in tokens]
    n = len(want)
    return [i for i in range(len(have) - n + 1) if have[i : i + n] == want]


def concept_presence(tokens: Sequence[str], concept: Concept | str, matcher: Optional[Lemmatizer] = None) -> bool:
    return bool(match_positions(tokens, concept, matcher))


@dataclass
class ConstraintCheck:
    present: list[bool] = field(default_factory=list)
    pos_correct: list[bool] = field(default_factory=list)

    @property
    def n_missing(self) -> int:
        return self.present.count(False)

    @property
    def n_pos_mismatch(self) -> int:
        """Concepts that occur but never with the required tag."""
        return sum(1 for p, ok in zip(self.present, self.pos_correct) if p and not ok)

    @property
    def coverage(self) -> float:
        n = len(self.present)
        if n == 0:
            return 0.0
        return (sum(self.present) / n) * (sum(self.pos_correct) / n)


def check_constraints(
    tokens: Sequence[str], cs: ConceptSet, tagger: Optional[Tagger] = None, matcher: Optional[Lemmatizer] = None
) -> ConstraintCheck:
    """Presence and POS agreement for every concept in ``cs``.

    A concept has the correct POS when at least one of its occurrences is
    tagged with the concept-set tag. Absent concepts never count as correct.
    """
    tagger = tagger or _default_tagger()
    tokens = list(tokens)
    tags = tagger.tag(tokens) if tokens else []
    check = ConstraintCheck()
    for concept in cs:
        hits = match_positions(tokens, concept, matcher)
        width = len(concept.label.split("_"))
        # a multi-word concept is judged by its last (head) word
        correct = any(tags[i + width - 1] == concept.pos for i in hits)
        check.present.append(bool(hits))
        check.pos_correct.append(correct)
    return check


def coverage_score(
    tokens: Sequence[str], cs: ConceptSet, tagger: Optional[Tagger] = None, matcher: Optional[Lemmatizer] = None
) -> float:
    """(share of concepts present) x (share of concepts present with the right POS)."""
    return check_constraints(tokens, cs, tagger, matcher).coverage


def best_n_select(
    candidates: Sequence[GenerationCandidate],
    cs: ConceptSet,
    tagger: Optional[Tagger] = None,
    matcher: Optional[Lemmatizer] = None,
) -> GenerationCandidate:
    """Pick the candidate with the highest coverage, ties going to the higher beam score.

    ``candidates`` must hold word tokens. The returned candidate has its
    ``coverage`` filled in.
    """
    if not candidates:
        raise ValueError("best_n_select needs at least one candidate")
    scored = [replace(c, coverage=coverage_score(c.tokens, cs, tagger, matcher)) for c in candidates]
    order = sorted(range(len(scored)), key=lambda i: (-scored[i].coverage, -scored[i].beam_score, i))
    return scored[order[0]]


_DEFAULT_LEMMATIZER = SuffixLemmatizer()
_TAGGER: Optional[LexiconTagger] = None


def _default_tagger() -> LexiconTagger:
    global _TAGGER
    if _TAGGER is None:
        _TAGGER = LexiconTagger(lemmatizer=_DEFAULT_LEMMATIZER)
    return _TAGGER
