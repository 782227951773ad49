"""
Episodic recall and perception
==============================

An episodic memory adds a time slot. Recalling an episode fixes its time
index. Perceiving a new input encodes it to a latent trace and decodes
the triples that trace expresses; memorable inputs are kept as engrams.
"""

from pathlib import Path

from tensormemory import (
    Encoder,
    EpisodicModel,
    ModelConfig,
    TrainConfig,
    associate,
    fit,
    ingest,
    perceive,
    recall,
    sample_recall,
)

store = ingest(Path(__file__).parent / "data" / "toy.tsv")

###############################################################################
# ``jack likes mary`` happens at ten times; every ``u`` episode happens
# once. Multi-slot negatives stop the model from inventing triples no
# negative ever covered. Singleton episodes need more rank than repeated
# ones; at rank 4 about a third of them decode to a wrong triple.

ep = EpisodicModel(ModelConfig(rank=8, seed=0))
fit(ep, store, TrainConfig(epochs=200, seed=0, batch_size=4, max_corrupt=3,
                           corrupt=("subject", "predicate", "object")))


def names(triple):
    s, p, o = triple
    return ep.entities.name(s), ep.predicates.name(p), ep.entities.name(o)


for s, p, o, label in store.quadruple_names()[8:]:
    (top, prob), = recall(ep, ep.times.id(label), beta=5.0, top_k=1)
    mark = "ok" if names(top) == (s, p, o) else "WRONG"
    print(f"{label}: {names(top)} p={prob:.3f} {mark}")

draws = sample_recall(ep, ep.times.id("u4"), beta=5.0, n=5, seed=0)
print("sampled from u4:", [names(t) for t in draws])

###############################################################################
# The identity encoder hands a stored trace straight back to the model;
# a memorable input becomes a new engram with its own time index.

trace = ep.times.row(ep.times.id("t3")).copy()
engram, decoded = perceive(Encoder.identity(ep.rank), ep, trace, memorable=True, beta=5.0, top_k=3)
print(f"new engram {engram.label!r} at time id {engram.time_id}")
for triple, prob in decoded:
    print(f"  {names(triple)} p={prob:.3f}")

###############################################################################
# Entities that play similar roles end up with similar latent vectors.

ann = ep.entities.id("ann")
print("closest to ann:", [(ep.entities.name(j), round(c, 2)) for j, c in associate(ep.entities, ann, k=3)])
