"""Rule-based lemmatizer and POS tagger used for constraint checks.

Both are small and deterministic on purpose: the tests pin exact outputs.
Anything with ``lemma(word)`` works as a matcher and anything with
``tag(tokens)`` works as a tagger.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from typing import Mapping, Optional, Protocol, Sequence

OPEN_CLASS = ("N", "V", "A", "R")

IRREGULAR = {
    "am": "be", "is": "be", "are": "be", "was": "be", "were": "be", "been": "be", "being": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do",
    "goes": "go", "went": "go", "gone": "go",
    "ran": "run", "sat": "sit", "rode": "ride", "ridden": "ride",
    "threw": "throw", "thrown": "throw", "caught": "catch", "ate": "eat", "eaten": "eat",
    "drove": "drive", "driven": "drive", "wrote": "write", "written": "write",
    "took": "take", "taken": "take", "gave": "give", "given": "give", "made": "make",
    "held": "hold", "stood": "stand", "swam": "swim", "swum": "swim", "sang": "sing", "sung": "sing",
    "spoke": "speak", "spoken": "speak", "broke": "break", "broken": "break", "chose": "choose",
    "flew": "fly", "flown": "fly", "grew": "grow", "grown": "grow", "drew": "draw", "drawn": "draw",
    "fed": "feed", "led": "lead", "bought": "buy", "brought": "bring", "taught": "teach",
    "thought": "think", "sold": "sell", "told": "tell", "wore": "wear", "worn": "wear",
    "kept": "keep", "slept": "sleep", "swept": "sweep", "met": "meet", "sent": "send",
    "spent": "spend", "built": "build", "dug": "dig", "hung": "hang", "hit": "hit", "cut": "cut",
    "put": "put", "shut": "shut", "set": "set", "began": "begin", "begun": "begin",
    "tied": "tie", "tying": "tie", "lying": "lie", "dying": "die", "lied": "lie",
    "men": "man", "women": "woman", "children": "child", "people": "person", "feet": "foot",
    "teeth": "tooth", "mice": "mouse", "geese": "goose", "knives": "knife", "wolves": "wolf",
}

_VOWELS = set("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Porter's m: the number of vowel-consonant sequences."""
    m, prev_vowel = 0, False
    for i in range(len(stem)):
        cons = _is_consonant(stem, i)
        if cons and prev_vowel:
            m += 1
        prev_vowel = not cons
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_cvc(stem: str) -> bool:
    if len(stem) < 3:
        return False
    return (
        _is_consonant(stem, len(stem) - 3)
        and not _is_consonant(stem, len(stem) - 2)
        and _is_consonant(stem, len(stem) - 1)
        and stem[-1] not in "wxy"
    )


class Lemmatizer(Protocol):
    def lemma(self, word: str) -> str: ...


class Tagger(Protocol):
    def tag(self, tokens: Sequence[str]) -> list[str]: ...


class SuffixLemmatizer:
    """Strip -s/-es/-ed/-ing with consonant undoubling and e-restoration."""

    def __init__(self, irregular: Optional[Mapping[str, str]] = None):
        self.irregular = dict(IRREGULAR if irregular is None else irregular)
        self._cache: dict[str, str] = {}

    def lemma(self, word: str) -> str:
        w = word.lower()
        if w not in self._cache:
            self._cache[w] = self._lemma(w)
        return self._cache[w]

    def _lemma(self, w: str) -> str:
        if w in self.irregular:
            return self.irregular[w]
        if len(w) <= 3 or not w.isalpha():
            return w
        if w.endswith("ies") and len(w) > 4:
            return w[:-3] + "y"
        if w.endswith("sses"):
            return w[:-2]
        if w.endswith(("ches", "shes", "xes", "zzes")):
            return w[:-2]
        if w.endswith("s"):
            if w.endswith(("ss", "us", "is")):
                return w
            return w[:-1]
        if w.endswith("ied") and len(w) > 4:
            return w[:-3] + "y"
        if w.endswith("eed"):
            return w
        for suffix in ("ing", "ed"):
            if w.endswith(suffix):
                stem = w[: -len(suffix)]
                if not _has_vowel(stem) or len(stem) < 2:
                    return w
                return _restore(stem)
        return w


def _restore(stem: str) -> str:
    # "rotat" -> "rotate", but not "eat" or "float"
    if stem.endswith(("at", "bl", "iz")) and len(stem) > 2 and _is_consonant(stem, len(stem) - 3):
        return stem + "e"
    if len(stem) >= 2 and stem[-1] == stem[-2] and _is_consonant(stem, len(stem) - 1) and stem[-1] not in "lsz":
        return stem[:-1]
    if _measure(stem) == 1 and _ends_cvc(stem):
        return stem + "e"
    return stem


_SUFFIX_TAGS = (
    ("ly", "R"),
    ("ous", "A"), ("ful", "A"), ("ive", "A"), ("able", "A"), ("ible", "A"), ("less", "A"), ("ic", "A"),
    ("tion", "N"), ("sion", "N"), ("ment", "N"), ("ness", "N"), ("ity", "N"), ("er", "N"), ("ist", "N"),
    ("ing", "V"), ("ed", "V"), ("ize", "V"), ("ise", "V"), ("ify", "V"),
)

# closed-class tags that steer the context rules
_NOMINAL_CONTEXT = {"DET", "POSS", "NUM"}
_VERBAL_CONTEXT = {"TO", "MODAL", "PRON"}
_OBJECT_START = {"DET", "POSS", "PRON", "OBJ"}


def _read_lexicon(text: str) -> dict[str, tuple[str, ...]]:
    lexicon = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, tags = line.split("\t")
        lexicon[word] = tuple(tags.split())
    return lexicon


@lru_cache(maxsize=1)
def default_lexicon() -> dict[str, tuple[str, ...]]:
    text = resources.files("kgtextgen.data").joinpath("lexicon.tsv").read_text(encoding="utf-8")
    return _read_lexicon(text)


class LexiconTagger:
    """Lexicon lookup refined by a handful of left/right context rules.

    Each lexicon entry lists the tags a word can take, default first.
    Inflected forms fall back to their lemma's entry; unknown words are
    tagged from their suffix. Open-class tags are N, V, A and R; the
    closed classes (DET, POSS, PRON, OBJ, ADP, CONJ, AUX, MODAL, TO, NUM)
    only feed the context rules.
    """

    def __init__(self, lexicon: Optional[Mapping[str, tuple[str, ...]]] = None, lemmatizer: Optional[Lemmatizer] = None):
        self.lexicon = dict(default_lexicon() if lexicon is None else lexicon)
        self.lemmatizer = lemmatizer or SuffixLemmatizer()

    def candidates(self, word: str) -> tuple[str, ...]:
        word = word.lower()
        if word in self.lexicon:
            return self.lexicon[word]
        base = self.lemmatizer.lemma(word)
        if base in self.lexicon:
            tags = self.lexicon[base]
            if word.endswith(("ing", "ed")) and "V" in tags:
                return ("V",) + tuple(t for t in tags if t != "V")
            # -s on a noun/verb base: plural noun or 3rd person verb
            return tuple(t for t in tags if t in ("N", "V")) or tags
        if not word.isalpha():
            return ("O",)
        for suffix, tag in _SUFFIX_TAGS:
            if word.endswith(suffix) and len(word) > len(suffix) + 2:
                return (tag,)
        return ("N",)

    def tag(self, tokens: Sequence[str]) -> list[str]:
        options = [self.candidates(t) for t in tokens]
        tags: list[str] = []
        for i, cands in enumerate(options):
            if len(cands) == 1:
                tags.append(cands[0])
                continue
            prev = tags[-1] if tags else None
            nxt = options[i + 1][0] if i + 1 < len(options) else None
            tags.append(self._disambiguate(cands, prev, nxt, "V" in tags))
        return tags

    @staticmethod
    def _disambiguate(cands: tuple[str, ...], prev: Optional[str], nxt: Optional[str], seen_verb: bool = False) -> str:
        if prev in _NOMINAL_CONTEXT or prev == "A":
            for tag in ("N", "A"):
                if tag in cands:
                    return tag
        if prev in _VERBAL_CONTEXT and "V" in cands:
            return "V"
        if nxt in _OBJECT_START and "V" in cands:
            return "V"
        # subject noun then verb ("the man combs"), unless the pair is a
        # noun compound ("hair comb sits", "uses a hair comb")
        if prev == "N" and "V" in cands and nxt != "V" and not seen_verb:
            return "V"
        return cands[0]


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokenization; surrounding punctuation is dropped."""
    out = []
    for raw in text.lower().split():
        core = raw.strip(".,!?;:\"'()")
        if core:
            out.append(core)
    return out
