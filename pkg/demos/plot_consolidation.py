"""
Consolidation
=============

Semantic memory can be derived from episodic memory by summing the time
slot out of a nonnegative model or by replaying sampled episodes into a
fresh semantic model. Confident triples can then be copied into an
explicit knowledge graph.
"""

from pathlib import Path

from tensormemory import (
    EpisodicModel,
    KnowledgeGraphStore,
    ModelConfig,
    TrainConfig,
    distill_explicit,
    fit,
    ingest,
    marginalize_time,
    replay_teach,
    semantic_like,
)

store = ingest(Path(__file__).parent / "data" / "toy.tsv")

###############################################################################
# Time marginalization collapses the order-4 core with the sum of all time
# vectors. Every semantic score equals the sum of the episodic scores.

nn = EpisodicModel(ModelConfig(rank=4, seed=0, nonnegative=True))
for quad in store.quadruple_names():
    nn.ids(quad, register=True)
sem = marginalize_time(nn)
s, p, o = nn.ids(("jack", "likes", "mary", "t0"))[:3]
total = sum(nn.score(s, p, o, t) for t in range(len(nn.times)))
print(f"marginalized {sem.score(s, p, o):.6f} vs sum over t {total:.6f}")

###############################################################################
# Replay samples triples from the recalled episodes and trains a semantic
# model on them. The episodic model is left untouched.

ep = EpisodicModel(ModelConfig(rank=4, seed=0))
fit(ep, store, TrainConfig(epochs=200, seed=0, batch_size=4, max_corrupt=3,
                           corrupt=("subject", "predicate", "object")))
taught = semantic_like(ep, seed=1)
schedule = [ep.times.id(f"t{i}") for i in range(10)]
replay_teach(ep, taught, schedule, 20, 5.0, TrainConfig(epochs=200, seed=0, batch_size=4), seed=0)
jmj = taught.ids(("jack", "likes", "mary"))
print(f"after replay: P(jack, likes, mary) = {taught.probability(*jmj):.4f}")

###############################################################################
# Distillation stores every triple above a confidence threshold.

kg = KnowledgeGraphStore()
added = distill_explicit(taught, kg, threshold=0.9)
print(f"{len(added)} triples with confidence >= 0.9, for example:")
print(*kg.to_tsv().splitlines()[:5], sep="\n")

###############################################################################
# Replay only showed the taught model ``jack likes mary``, yet it accepts
# many ``knows`` triples as well. Its entity and predicate vectors start
# as copies of the episodic ones, so a confidence threshold alone admits
# triples that were never replayed.

print("taught:", f"{taught.probability(*jmj):.4f}",
      "never replayed:", f"{taught.probability(*taught.ids(('mary', 'knows', 'ann'))):.4f}")
