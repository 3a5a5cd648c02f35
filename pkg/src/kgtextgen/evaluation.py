"""Reference metrics (corpus BLEU, ROUGE-L, ROUGE-2) and constraint statistics."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from .decoding import check_constraints
from .extraction import ConceptSet
from .tagging import Lemmatizer, Tagger, tokenize

Tokens = Sequence[str]


def _as_tokens(text) -> list[str]:
    return tokenize(text) if isinstance(text, str) else list(text)


def ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _corpus_counts(hypotheses: Sequence, references: Sequence[Sequence], n: int):
    if len(hypotheses) != len(references):
        raise ValueError("hypotheses and references must be aligned")
    if not hypotheses:
        raise ValueError("empty corpus")
    matched = [0] * n
    total = [0] * n
    hyp_len = ref_len = 0
    for hyp, refs in zip(hypotheses, references):
        hyp = _as_tokens(hyp)
        refs = [_as_tokens(r) for r in refs]
        if not refs:
            raise ValueError("every hypothesis needs at least one reference")
        hyp_len += len(hyp)
        ref_len += min((abs(len(r) - len(hyp)), len(r)) for r in refs)[1]
        for k in range(1, n + 1):
            counts = ngrams(hyp, k)
            max_ref: Counter = Counter()
            for r in refs:
                max_ref |= ngrams(r, k)
            matched[k - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            total[k - 1] += sum(counts.values())
    return matched, total, hyp_len, ref_len


def modified_precision(hypotheses: Sequence, references: Sequence[Sequence], k: int) -> float:
    """Corpus-level clipped k-gram precision (0 when the hypotheses have no k-grams)."""
    matched, total, _, _ = _corpus_counts(hypotheses, references, k)
    return matched[-1] / total[-1] if total[-1] else 0.0


def bleu(hypotheses: Sequence, references: Sequence[Sequence], n: int = 4) -> float:
    """Corpus BLEU-n with uniform weights, multi-reference clipping and no smoothing.

    The brevity penalty uses, per sentence, the reference length closest to
    the hypothesis length (shorter wins ties).
    """
    if not 1 <= n <= 4:
        raise ValueError(f"n must be in 1..4, got {n}")
    matched, total, hyp_len, ref_len = _corpus_counts(hypotheses, references, n)
    if min(total) == 0 or min(matched) == 0:
        return 0.0
    log_p = sum(math.log(m / t) for m, t in zip(matched, total)) / n
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(log_p)


def _f1(overlap: int, hyp_len: int, ref_len: int) -> float:
    if overlap == 0:
        return 0.0
    p, r = overlap / hyp_len, overlap / ref_len
    return 2 * p * r / (p + r)


def lcs_length(a: Tokens, b: Tokens) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(hypothesis, references: Sequence) -> float:
    hyp = _as_tokens(hypothesis)
    return max((_f1(lcs_length(hyp, r), len(hyp), len(r)) for r in map(_as_tokens, references)), default=0.0)


def rouge_2(hypothesis, references: Sequence) -> float:
    hyp = ngrams(_as_tokens(hypothesis), 2)
    best = 0.0
    for ref in references:
        ref_bigrams = ngrams(_as_tokens(ref), 2)
        overlap = sum((hyp & ref_bigrams).values())
        best = max(best, _f1(overlap, sum(hyp.values()), sum(ref_bigrams.values())))
    return best


@dataclass(frozen=True)
class SampleRow:
    sample_id: Optional[str]
    hypothesis: str
    n_concepts: int
    n_missing: int
    n_pos_mismatch: int
    rouge_l: float
    rouge_2: float


def _sample_checks(outputs, concept_sets, tagger, matcher):
    if len(outputs) != len(concept_sets):
        raise ValueError("outputs and concept sets must be aligned")
    return [check_constraints(_as_tokens(o), cs, tagger, matcher) for o, cs in zip(outputs, concept_sets)]


def constraint_report(
    outputs: Sequence,
    concept_sets: Sequence[ConceptSet],
    tagger: Optional[Tagger] = None,
    matcher: Optional[Lemmatizer] = None,
) -> tuple[float, float]:
    """Return ``(missing_concept_pct, pos_mismatch_pct)``.

    Missing is counted over concept occurrences; POS mismatch is the share
    of samples with at least one present concept that never carries its
    required tag.
    """
    checks = _sample_checks(outputs, concept_sets, tagger, matcher)
    return _constraint_pcts(checks)


def _constraint_pcts(checks) -> tuple[float, float]:
    if not checks:
        return 0.0, 0.0
    concepts = sum(len(c.present) for c in checks)
    missing = sum(c.n_missing for c in checks)
    mismatched = sum(1 for c in checks if c.n_pos_mismatch)
    return 100.0 * missing / concepts, 100.0 * mismatched / len(checks)


@dataclass
class EvalReport:
    bleu_1: float
    bleu_2: float
    bleu_3: float
    bleu_4: float
    rouge_l: float
    rouge_2: float
    missing_concept_pct: float
    pos_mismatch_pct: float
    rows: list[SampleRow] = field(default_factory=list)

    METRICS = ("bleu_1", "bleu_2", "bleu_3", "bleu_4", "rouge_l", "rouge_2")

    def to_json(self, header: Optional[dict] = None) -> str:
        payload = {"header": header or {}, **asdict(self)}
        payload["percent"] = {m: 100.0 * getattr(self, m) for m in self.METRICS}
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_table(self, label: str = "model") -> str:
        """Aligned text table: scores ×100 plus the two constraint columns."""
        heads = ["Model", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "ROUGE-2", "Missing %", "POS mism. %"]
        values = [label] + [f"{100 * getattr(self, m):.2f}" for m in self.METRICS]
        values += [f"{self.missing_concept_pct:.2f}", f"{self.pos_mismatch_pct:.2f}"]
        widths = [max(len(h), len(v)) for h, v in zip(heads, values)]
        line = lambda cells: "  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths)))
        return "\n".join([line(heads), line(["-" * w for w in widths]), line(values)])


def evaluate(
    outputs: Sequence,
    concept_sets: Sequence[ConceptSet],
    references: Optional[Sequence[Sequence]] = None,
    tagger: Optional[Tagger] = None,
    matcher: Optional[Lemmatizer] = None,
) -> EvalReport:
    """Score outputs against references (defaulting to each concept set's own)."""
    if references is None:
        references = [cs.references for cs in concept_sets]
    if not (len(outputs) == len(concept_sets) == len(references)):
        raise ValueError("outputs, concept sets and references must be aligned")
    hyps = [_as_tokens(o) for o in outputs]
    checks = _sample_checks(hyps, concept_sets, tagger, matcher)
    rows = []
    for hyp, cs, refs, check in zip(hyps, concept_sets, references, checks):
        rows.append(
            SampleRow(
                cs.source_id, " ".join(hyp), len(cs), check.n_missing, check.n_pos_mismatch,
                rouge_l(hyp, refs), rouge_2(hyp, refs),
            )
        )
    missing, mismatch = _constraint_pcts(checks)
    n = len(rows)
    return EvalReport(
        *(bleu(hyps, references, k) for k in range(1, 5)),
        rouge_l=sum(r.rouge_l for r in rows) / n,
        rouge_2=sum(r.rouge_2 for r in rows) / n,
        missing_concept_pct=missing,
        pos_mismatch_pct=mismatch,
        rows=rows,
    )
