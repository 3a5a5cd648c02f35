"""Deterministic toy corpus and matching knowledge graph.

Sentences describe an agent doing an activity somewhere, e.g. "a boy
throws a frisbee in the park". Concept sets keep the verb and object plus
the agent and/or the place, in alphabetical order as in CommonGen. The
graph links verbs, objects and places the way ConceptNet would, adds a
few theme hubs that query expansion can find, and includes edges that
selection must filter (FormOf, Antonym, wrong-POS senses).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .extraction import ConceptSet
from .kg_store import Concept, Edge, KnowledgeGraph

AGENTS = ("man", "woman", "boy", "girl")

# verb, 3rd-person form, -ing form, object, place, preposition, theme
ACTIVITIES = (
    ("throw", "throws", "throwing", "frisbee", "park", "in", "sport"),
    ("catch", "catches", "catching", "frisbee", "park", "in", "sport"),
    ("kick", "kicks", "kicking", "ball", "field", "on", "sport"),
    ("throw", "throws", "throwing", "ball", "field", "on", "sport"),
    ("hit", "hits", "hitting", "ball", "court", "on", "sport"),
    ("ride", "rides", "riding", "horse", "field", "on", "animal"),
    ("feed", "feeds", "feeding", "horse", "field", "on", "animal"),
    ("pet", "pets", "petting", "dog", "sofa", "on", "animal"),
    ("wash", "washes", "washing", "dog", "yard", "in", "animal"),
    ("ride", "rides", "riding", "boat", "water", "in", "travel"),
    ("sail", "sails", "sailing", "boat", "lake", "on", "travel"),
    ("ride", "rides", "riding", "bike", "street", "on", "travel"),
    ("drive", "drives", "driving", "car", "street", "on", "travel"),
    ("comb", "combs", "combing", "hair", "bathroom", "in", "home"),
    ("brush", "brushes", "brushing", "teeth", "bathroom", "in", "home"),
    ("read", "reads", "reading", "book", "bed", "on", "home"),
    ("wash", "washes", "washing", "plate", "kitchen", "in", "food"),
    ("cook", "cooks", "cooking", "pasta", "kitchen", "in", "food"),
    ("cut", "cuts", "cutting", "bread", "kitchen", "in", "food"),
    ("eat", "eats", "eating", "pizza", "table", "at", "food"),
    ("drink", "drinks", "drinking", "coffee", "table", "at", "food"),
    ("play", "plays", "playing", "guitar", "stage", "on", "music"),
    ("sing", "sings", "singing", "song", "stage", "on", "music"),
    ("play", "plays", "playing", "piano", "room", "in", "music"),
    ("plant", "plants", "planting", "tree", "garden", "in", "garden"),
    ("water", "waters", "watering", "flower", "garden", "in", "garden"),
    ("climb", "climbs", "climbing", "tree", "garden", "in", "garden"),
    ("wear", "wears", "wearing", "hat", "beach", "on", "clothing"),
    ("wear", "wears", "wearing", "coat", "snow", "in", "clothing"),
    ("paint", "paints", "painting", "picture", "room", "in", "home"),
)

TEMPLATES = (
    "a {agent} {verb_s} a {obj} {prep} the {place}",
    "the {agent} is {verb_ing} a {obj} {prep} the {place}",
)

# agent/verb/object/place choices kept in each concept set
PATTERNS = (
    ("agent", "verb", "obj", "place"),
    ("agent", "verb", "obj"),
    ("verb", "obj", "place"),
)

_POS = {"agent": "N", "verb": "V", "obj": "N", "place": "N"}


@dataclass(frozen=True)
class SyntheticSample:
    concept_set: ConceptSet
    split: str

    @property
    def references(self) -> tuple[str, ...]:
        return self.concept_set.references


def build_graph() -> KnowledgeGraph:
    edges: list[Edge] = []

    def add(h, hp, rel, t, tp, w):
        edges.append(Edge(Concept(h, hp), rel, Concept(t, tp), w))

    themes: dict[str, set] = {}
    for verb, _, ing, obj, place, _, theme in ACTIVITIES:
        add(obj, "N", "ReceivesAction", verb, "V", 2.0)
        add(obj, "N", "AtLocation", place, "N", 1.5)
        add(verb, "V", "HasPrerequisite", obj, "N", 1.0)
        add(ing, "V", "FormOf", verb, "V", 1.0)
        themes.setdefault(theme, set()).update([(verb, "V"), (obj, "N"), (place, "N")])
    for agent in AGENTS:
        add(agent, "N", "IsA", "person", "N", 2.0)
        add(agent, "N", "CapableOf", "move", "V", 0.5)
    for theme, members in sorted(themes.items()):
        for label, pos in sorted(members):
            add(label, pos, "RelatedTo", theme, "N", 1.0)
    # wrong-POS senses and opposing relations that selection has to drop
    add("comb", "N", "UsedFor", "hair", "N", 3.0)
    add("water", "N", "AtLocation", "lake", "N", 2.5)
    add("man", "N", "Antonym", "woman", "N", 2.0)
    add("boy", "N", "Antonym", "girl", "N", 2.0)
    add("hat", "N", "DistinctFrom", "coat", "N", 1.0)
    return KnowledgeGraph(edges)


def generate_corpus(seed: int = 0, test_fraction: float = 0.15) -> list[SyntheticSample]:
    """Every (agent, activity, pattern) combination, with one reference per template.

    Whole (agent, activity) combinations are held out for the test split
    so test concept sets never appear verbatim in training. Reference
    order is shuffled per sample.
    """
    rng = np.random.default_rng(seed)
    combos = list(itertools.product(range(len(AGENTS)), range(len(ACTIVITIES))))
    n_test = int(round(test_fraction * len(combos)))
    test_combos = {combos[i] for i in rng.permutation(len(combos))[:n_test]}
    samples = []
    for a_idx, act_idx in combos:
        agent = AGENTS[a_idx]
        verb, verb_s, verb_ing, obj, place, prep, _ = ACTIVITIES[act_idx]
        split = "test" if (a_idx, act_idx) in test_combos else "train"
        slots = {"agent": agent, "verb": verb, "obj": obj, "place": place}
        for pattern in PATTERNS:
            refs = []
            for t_idx in rng.permutation(len(TEMPLATES)):
                text = TEMPLATES[t_idx].format(
                    agent=agent, verb_s=verb_s, verb_ing=verb_ing, obj=obj, prep=prep, place=place
                )
                if "place" not in pattern:
                    text = text.rsplit(f" {prep} the ", 1)[0]
                refs.append(text)
            items = sorted((Concept(slots[s], _POS[s]) for s in pattern), key=lambda c: c.label)
            sid = f"{agent}-{verb}-{obj}-{'-'.join(pattern)}"
            samples.append(SyntheticSample(ConceptSet(tuple(items), sid, tuple(refs)), split))
    return samples


def split(samples, name: str) -> list[SyntheticSample]:
    return [s for s in samples if s.split == name]
