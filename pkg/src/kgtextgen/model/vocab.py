from __future__ import annotations

from collections import Counter
from typing import Iterable, Sequence

PAD, UNK, CLS, SEP, MASK, EOS = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[EOS]"
SPECIALS = (PAD, UNK, CLS, SEP, MASK, EOS)


class Vocab:
    """Whitespace-token vocabulary with a fixed block of special tokens."""

    def __init__(self, words: Iterable[str] = ()):
        self.itos: list[str] = list(SPECIALS)
        seen = set(SPECIALS)
        for w in words:
            if w not in seen:
                seen.add(w)
                self.itos.append(w)
        self.stoi = {w: i for i, w in enumerate(self.itos)}

    @classmethod
    def build(cls, texts: Iterable[Sequence[str]], min_count: int = 1) -> "Vocab":
        counts = Counter()
        for tokens in texts:
            counts.update(tokens)
        words = sorted(w for w, n in counts.items() if n >= min_count)
        return cls(words)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, word):
        return word in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.itos == other.itos

    @property
    def pad_id(self):
        return self.stoi[PAD]

    @property
    def unk_id(self):
        return self.stoi[UNK]

    @property
    def cls_id(self):
        return self.stoi[CLS]

    @property
    def sep_id(self):
        return self.stoi[SEP]

    @property
    def mask_id(self):
        return self.stoi[MASK]

    @property
    def eos_id(self):
        return self.stoi[EOS]

    @property
    def special_ids(self) -> list[int]:
        return [self.stoi[s] for s in SPECIALS]

    def encode(self, tokens: Sequence[str]) -> list[int]:
        unk = self.unk_id
        return [self.stoi.get(t, unk) for t in tokens]

    def decode(self, ids: Sequence[int], strip_special: bool = True) -> list[str]:
        words = [self.itos[i] for i in ids]
        if strip_special:
            words = [w for w in words if w not in SPECIALS]
        return words

    def to_json(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_json(cls, itos: Sequence[str]) -> "Vocab":
        if tuple(itos[: len(SPECIALS)]) != SPECIALS:
            raise ValueError("vocabulary does not start with the special tokens")
        return cls(itos[len(SPECIALS) :])
