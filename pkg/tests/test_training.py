import math

import pytest
import torch

from kgtextgen import synthetic
from kgtextgen.extraction import ConceptSet
from kgtextgen.kg_store import Concept
from kgtextgen.linearize import EvidenceSentence
from kgtextgen.model.batching import build_example, collate
from kgtextgen.model.checkpoint import load_checkpoint, save_checkpoint
from kgtextgen.model.network import ModelConfig, Seq2SeqTransformer
from kgtextgen.model.training import TrainConfig, TrainingDiverged, mask_targets, train
from kgtextgen.model.vocab import CLS, EOS, SEP, SPECIALS, Vocab
from kgtextgen.pipeline import build_vocab, make_examples, prepare_knowledge

from .conftest import cset


def frisbee_set() -> ConceptSet:
    cs = cset("dog_N", "frisbee_N", "catch_V")
    return ConceptSet(cs.items, "s0", ("the dog catches a frisbee",))


def evidence(*tokens_list):
    return [EvidenceSentence(t) for t in tokens_list]


@pytest.fixture(scope="module")
def synthetic_inject():
    samples = synthetic.split(synthetic.generate_corpus(), "train")
    sets = [s.concept_set for s in samples]
    paths, expansions = prepare_knowledge(synthetic.build_graph(), sets)
    examples = make_examples(sets, "inject", paths, expansions)
    vocab = build_vocab(examples)
    cfg = ModelConfig(vocab_size=len(vocab), d_model=64, n_layers=2, n_heads=4, cs_encoder_hidden=32)
    return train(examples, vocab, cfg, TrainConfig(mode="inject"))


# -- vocab and examples


def test_vocab_round_trip():
    vocab = Vocab.build([["b", "a", "b"], ["c"]])
    assert vocab.itos[: len(SPECIALS)] == list(SPECIALS)
    assert vocab.decode(vocab.encode(["a", "zzz", "c"]), strip_special=False) == ["a", "[UNK]", "c"]
    assert Vocab.from_json(vocab.to_json()) == vocab
    with pytest.raises(ValueError):
        Vocab.from_json(["a", "b"])


def test_build_example_layouts():
    cs = frisbee_set()
    ev = evidence("dog capable of catch frisbee")
    exp = [Concept("park", "N")]
    base = build_example(cs, "the dog catches a frisbee", ev, exp, mode="baseline")
    assert base.source == [CLS, "dog", "frisbee", "catch", SEP]
    assert base.given == [False, True, True, True, False]
    assert base.target[-1] == EOS and base.evidence == []
    inject = build_example(cs, None, ev, exp, mode="inject")
    assert inject.source == [CLS, "dog", "frisbee", "catch", "park", SEP]
    assert inject.expansion == [False, False, False, False, True, False]
    assert inject.evidence == [ev[0].tokens] and inject.target == []
    concat = build_example(cs, None, ev, exp, mode="concat")
    assert concat.source == [CLS, "dog", "frisbee", "catch", "park"] + ev[0].tokens + [SEP]
    assert not any(concat.given[5:])


def test_collate_truncation_counter():
    cs = frisbee_set()
    long = "w " * 30
    ex = build_example(cs, "the dog catches a frisbee", evidence(long.strip(), "short one"), mode="inject")
    vocab = build_vocab([ex])
    cfg = ModelConfig(vocab_size=len(vocab), d_model=8, n_heads=2, max_evidence_len=10, max_evidence_sentences=1)
    batch = collate([ex], vocab, cfg)
    # one sentence cut to length, one dropped for exceeding the sentence limit
    assert batch.n_truncated == 2
    assert batch.evidence_ids.shape == (1, 1, 10)
    assert batch.evidence_lens.tolist() == [[10]]


def test_mask_targets_hits_every_row_and_only_real_tokens():
    examples = make_examples([frisbee_set()] * 5, "baseline")
    vocab = build_vocab(examples)
    cfg = ModelConfig(vocab_size=len(vocab), d_model=8, n_heads=2)
    batch = collate(examples, vocab, cfg)
    gen = torch.Generator().manual_seed(0)
    for prob in (0.01, 0.7, 1.0):
        ids, chosen = mask_targets(batch, vocab, prob, gen)
        assert bool(chosen.any(dim=1).all())
        assert not bool((chosen & batch.tgt_pad).any())
        assert bool((ids[chosen] == vocab.mask_id).all())
        assert torch.equal(ids[~chosen], batch.tgt_ids[~chosen])


# -- training


def test_overfit_single_sample():
    examples = make_examples([frisbee_set()], "baseline")
    vocab = build_vocab(examples)
    cfg = ModelConfig(vocab_size=len(vocab), d_model=32, n_heads=2, cs_encoder_hidden=8)
    result = train(examples, vocab, cfg, TrainConfig(epochs=150, batch_size=1, lr=3e-3, mode="baseline"))
    assert result.losses[-1] < 0.1


def test_fixed_seed_gives_identical_curves():
    examples = make_examples([frisbee_set(), cset("man_N", "comb_V", "hair_N")], "baseline")
    examples = [e for e in examples if e.target]
    vocab = build_vocab(examples)
    cfg = ModelConfig(vocab_size=len(vocab), d_model=16, n_heads=2, cs_encoder_hidden=4)
    runs = [train(examples, vocab, cfg, TrainConfig(epochs=5, batch_size=1, mode="baseline")) for _ in range(2)]
    assert runs[0].losses == runs[1].losses
    other = train(examples, vocab, cfg, TrainConfig(epochs=5, batch_size=1, mode="baseline", seed=1))
    assert other.losses != runs[0].losses


def test_nan_loss_aborts_with_diagnostics():
    examples = make_examples([frisbee_set()], "baseline")
    vocab = build_vocab(examples)
    cfg = ModelConfig(vocab_size=len(vocab), d_model=8, n_heads=2)
    model = Seq2SeqTransformer(cfg)
    with torch.no_grad():
        model.lm_head.bias.fill_(float("nan"))
    with pytest.raises(TrainingDiverged, match="epoch 1"):
        train(examples, vocab, cfg, TrainConfig(epochs=2, mode="baseline"), model=model)
    with pytest.raises(ValueError):
        train([], vocab, cfg)


def test_inject_mode_on_synthetic_corpus(synthetic_inject, tmp_path):
    losses = synthetic_inject.losses
    assert len(losses) == TrainConfig().epochs
    assert all(math.isfinite(x) for x in losses)
    assert losses[-1] <= 0.5 * losses[0]
    path = tmp_path / "losses.csv"
    synthetic_inject.write_loss_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,loss" and len(lines) == len(losses) + 1


def test_checkpoint_round_trip(synthetic_inject, tmp_path):
    model, vocab = synthetic_inject.model, synthetic_inject.vocab
    path = tmp_path / "model.json"
    save_checkpoint(path, model, vocab, {"mode": "inject"})
    loaded, loaded_vocab, extra = load_checkpoint(path)
    assert loaded_vocab == vocab and extra == {"mode": "inject"}
    assert loaded.config == model.config
    for (name, a), (_, b) in zip(model.state_dict().items(), loaded.state_dict().items()):
        assert torch.equal(a, b), name
    examples = make_examples([frisbee_set()], "inject")
    batch = collate(examples, vocab, model.config)
    with torch.no_grad():
        assert torch.equal(model(batch, "inject"), loaded(batch, "inject"))


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = tmp_path / "x.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(ValueError):
        load_checkpoint(path)
