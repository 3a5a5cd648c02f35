#!/usr/bin/env python3
# Walk through graph loading, path extraction, selection and query expansion
# on the small fixture graphs used by the tests.

# %%
from pathlib import Path

from kgtextgen import SelectionConfig, compute_priors, expand_query, extract_multihop, load_dump, parse_commongen
from kgtextgen.extraction import select
from kgtextgen.linearize import linearize_path

fixtures = Path(__file__).resolve().parent.parent / "tests" / "fixtures"
graph, skipped = load_dump(fixtures / "pizza.tsv")
print(len(graph), "edges,", skipped, "rows skipped")

# %% every 1- and 2-hop path between pairs of concepts
cs = parse_commongen("broccoli_N#cheese_N#chicken_N#pizza_N")
paths = extract_multihop(graph, cs)
for p in paths:
    print(p.hop_count, " ".join(p.labels()))

# %% FormOf and friends are dropped, then the rest is turned into evidence text
kept = select(paths, cs, SelectionConfig())
for p in kept:
    print(linearize_path(p).text)

# %% prior-based subset: relation types that are rare across the corpus need a lucky draw
priors = compute_priors(paths)
print(priors)
print(len(select(paths, cs, SelectionConfig(strategy="prior_subset", prior_threshold=0.9, seed=3), priors)), "of", len(kept))

# %% query expansion: neighbours shared by most of the concept set
expansion_graph, _ = load_dump(fixtures / "expansion.tsv")
print([c.label for c in expand_query(expansion_graph, parse_commongen("drill_N#field_N#run_V#team_N"))])
