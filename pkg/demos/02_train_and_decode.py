#!/usr/bin/env python3
# Train the small injection model on the synthetic corpus and compare the
# top beam with the Best-N pick. A short run leaves the beams disagreeing
# often enough to show the reranking at work.

# %%
from kgtextgen import synthetic
from kgtextgen.decoding import DecodeConfig, check_constraints
from kgtextgen.evaluation import evaluate
from kgtextgen.model.generate import generate
from kgtextgen.model.network import ModelConfig
from kgtextgen.model.training import TrainConfig, train
from kgtextgen.pipeline import build_vocab, make_examples, prepare_knowledge

corpus = synthetic.generate_corpus()
train_sets = [s.concept_set for s in synthetic.split(corpus, "train")]
test_sets = [s.concept_set for s in synthetic.split(corpus, "test")]
paths, expansions = prepare_knowledge(synthetic.build_graph(), train_sets + test_sets, max_expansions=2)

# %%
examples = make_examples(train_sets, "inject", paths, expansions)
vocab = build_vocab(examples)
config = ModelConfig(vocab_size=len(vocab), d_model=64, n_heads=4, cs_encoder_hidden=32)
result = train(examples, vocab, config, TrainConfig(epochs=8, mode="inject"))
print("loss per epoch:", [round(x, 3) for x in result.losses])

# %% decode the held-out split
outputs = []
for ex in make_examples(test_sets, "inject", paths, expansions, with_targets=False):
    out = generate(result.model, vocab, ex, DecodeConfig(beam_width=4, best_n=4, max_len=16))
    outputs.append(out.sentence)
    top = " ".join(out.top_beam.tokens)
    if top != out.sentence:
        missing = check_constraints(out.top_beam.tokens, ex.concept_set).n_missing
        print(f"{ex.concept_set.to_commongen()}: '{top}' ({missing} missing) -> '{out.sentence}'")

# %%
print(evaluate(outputs, test_sets).to_table("inject"))
