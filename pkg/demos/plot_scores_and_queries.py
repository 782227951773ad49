"""
Scores and slot queries
=======================

A semantic memory scores a triple (s, p, o) by contracting a small core
tensor with the latent vectors of its three symbols. A query leaves one
slot free and returns a distribution over that slot's vocabulary.
"""

import numpy as np

from tensormemory import (
    FREE,
    LINEAR,
    MARGINALIZED,
    Fixed,
    ModelConfig,
    SemanticModel,
    SlotPattern,
    conditional_distribution,
    marginal_distribution,
    sample,
)

PEOPLE = ["jack", "mary", "ann", "bob"]
RELATIONS = ["likes", "knows"]

m = SemanticModel(ModelConfig(rank=3, seed=0))
for name in PEOPLE:
    m.entities.register(name)
for name in RELATIONS:
    m.predicates.register(name)

jack, mary = m.entities.id("jack"), m.entities.id("mary")
likes = m.predicates.id("likes")
print(f"theta(jack, likes, mary) = {m.score(jack, likes, mary):+.4f}")
print(f"P(true)                  = {m.probability(jack, likes, mary):.4f}")

###############################################################################
# Who does jack like? Larger inverse temperatures sharpen the answer.

pattern = SlotPattern(Fixed(jack), Fixed(likes), FREE)
for beta in (0.0, 1.0, 20.0):
    res = conditional_distribution(m, pattern, beta=beta)
    print(f"beta={beta:>4}:", np.round(res.probabilities, 3))

draws = sample(m, pattern, beta=1.0, n=10, seed=1)
print("ten draws:", [m.entities.name(i) for i in draws])

###############################################################################
# On a nonnegative model a slot can be summed out exactly: the predicate
# slot below is replaced by the sum of all predicate vectors.

nn = SemanticModel(ModelConfig(rank=3, seed=0, nonnegative=True))
for name in PEOPLE:
    nn.entities.register(name)
for name in RELATIONS:
    nn.predicates.register(name)
res = marginal_distribution(nn, SlotPattern(Fixed(jack), MARGINALIZED, FREE))
by_p = [conditional_distribution(nn, SlotPattern(Fixed(jack), Fixed(p), FREE), beta=LINEAR).scores
        for p in range(len(nn.predicates))]
print("marginal scores     :", np.round(res.scores, 5))
print("sum over predicates :", np.round(sum(by_p), 5))
