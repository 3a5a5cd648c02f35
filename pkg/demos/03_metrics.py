#!/usr/bin/env python3
# The metrics on a handful of sentences, including the coverage score used
# to rerank beams.

# %%
from kgtextgen import coverage_score, parse_commongen
from kgtextgen.evaluation import bleu, constraint_report, rouge_2, rouge_l
from kgtextgen.tagging import LexiconTagger, tokenize

refs = ["a man combs his hair in the bathroom", "the man is combing his hair"]
for hyp in ("a man combs his hair", "the man uses a hair comb", "a dog sleeps"):
    print(f"{hyp!r}: BLEU-2 {bleu([hyp], [refs], 2):.3f}  ROUGE-L {rouge_l(hyp, refs):.3f}  ROUGE-2 {rouge_2(hyp, refs):.3f}")

# %% the tagger decides whether "comb" is used as a verb
tagger = LexiconTagger()
print(tagger.tag(tokenize("the man uses a hair comb")))
cs = parse_commongen("comb_V#hair_N#man_N")
print(coverage_score(tokenize("the man uses a hair comb"), cs))
print(constraint_report(["a man combs his hair", "the man uses a hair comb"], [cs, cs]))
