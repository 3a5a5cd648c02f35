import pytest

from kgtextgen.tagging import LexiconTagger, SuffixLemmatizer, default_lexicon, tokenize


@pytest.mark.parametrize(
    "word, lemma",
    [
        ("combs", "comb"),
        ("combing", "comb"),
        ("combed", "comb"),
        ("catches", "catch"),
        ("riding", "ride"),
        ("running", "run"),
        ("hopping", "hop"),
        ("rotating", "rotate"),
        ("eating", "eat"),
        ("floated", "float"),
        ("filling", "fill"),
        ("flies", "fly"),
        ("cried", "cry"),
        ("glasses", "glass"),
        ("buzzes", "buzz"),
        ("bus", "bus"),
        ("ran", "run"),
        ("teeth", "tooth"),
        ("women", "woman"),
        ("Dogs", "dog"),
    ],
)
def test_lemmas(word, lemma):
    assert SuffixLemmatizer().lemma(word) == lemma


def test_custom_irregulars_replace_defaults():
    lem = SuffixLemmatizer({"went": "go"})
    assert lem.lemma("went") == "go"
    assert lem.lemma("ran") == "ran"


def _tags(sentence):
    tokens = tokenize(sentence)
    return dict(zip(tokens, LexiconTagger().tag(tokens)))


def test_tokenize():
    assert tokenize("A dog, running!  (fast)") == ["a", "dog", "running", "fast"]
    assert tokenize("") == []


def test_frisbee_sentence_tags():
    tags = _tags("A dog throws a frisbee at a football player")
    assert (tags["dog"], tags["throws"], tags["frisbee"]) == ("N", "V", "N")


@pytest.mark.parametrize(
    "sentence, word, tag",
    [
        ("a man combs his hair", "combs", "V"),
        ("the hair comb sits on the table", "comb", "N"),
        ("she will ride the bike", "ride", "V"),
        ("they enjoyed the ride", "ride", "N"),
        ("people watch the run", "run", "N"),
        ("the team runs a drill", "runs", "V"),
        ("a boy is riding a horse", "riding", "V"),
        ("the girl waters the flower", "waters", "V"),
        ("a boat in the water", "water", "N"),
    ],
)
def test_context_disambiguation(sentence, word, tag):
    assert _tags(sentence)[word] == tag


def test_unknown_words_use_suffix_or_noun_default():
    tagger = LexiconTagger(lexicon={})
    assert tagger.candidates("quickly") == ("R",)
    assert tagger.candidates("zorp") == ("N",)
    assert tagger.candidates("42") == ("O",)


def test_lexicon_loads_and_has_ambiguous_entries():
    lex = default_lexicon()
    assert len(lex) > 300
    assert set(lex["comb"]) == {"N", "V"}
    assert lex["the"] == ("DET",)


def test_tagging_deterministic():
    tokens = tokenize("a man throws a ball on the field")
    t = LexiconTagger()
    assert t.tag(tokens) == t.tag(tokens) == LexiconTagger().tag(tokens)
