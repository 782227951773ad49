"""
Training and probabilistic materialization
==========================================

Two groups of entities are linked densely inside each group and never
across. One within-group link is held out of training. A low-rank model
cannot store the exception, so it assigns the missing link a high score.
"""

import itertools

from tensormemory import FactStore, ModelConfig, SemanticModel, TrainConfig, evaluate_materialization, fit

held = ("a0", "linked", "a1")
store = FactStore()
for group in ("a", "b"):
    names = [f"{group}{i}" for i in range(8)]
    for x, y in itertools.product(names, names):
        if (x, "linked", y) != held:
            store.add_triple(x, "linked", y)

m = SemanticModel(ModelConfig(rank=4, seed=0))
report = fit(m, store, TrainConfig(epochs=100, seed=0, l2=0.03))
print(f"{len(store)} facts, loss {report.losses[0]:.3f} -> {report.final_loss:.3f}")

###############################################################################
# Compare the held-out link with a cross-group link and with random
# corruptions of the held-out fact.

print(f"P{held}        = {m.probability(*m.ids(held)):.3f}")
print(f"P('a0', 'linked', 'b1') = {m.probability(*m.ids(('a0', 'linked', 'b1'))):.3f}")
ev = evaluate_materialization(m, [m.ids(held)], n_negatives=100, seed=0)
print(f"margin over 100 corruptions: {ev.margin:+.3f}")
