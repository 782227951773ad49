"""Fit Tucker memory models to observed facts.

The loss is mean binary cross-entropy of ``sig(theta)`` against 0/1
labels plus ``l2 / 2`` times the squared norm of the core and of every
embedding row the batch touches. Each negative replaces one slot of a
positive (chosen uniformly from ``TrainConfig.corrupt``) with a uniformly
drawn symbol, or up to ``max_corrupt`` distinct slots at once; corruptions
that hit a known positive are dropped.
"""

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

from .errors import TrainingDivergedError
from .memory_model import EpisodicModel, SymbolRegistry

__all__ = [
    "FactStore",
    "TrainConfig",
    "Gradients",
    "TrainReport",
    "MarginReport",
    "batch_scores",
    "loss_and_gradients",
    "fit",
    "evaluate_materialization",
]

logger = logging.getLogger(__name__)


class FactStore:
    """Deduplicated triples and quadruples over named symbols.

    Facts are kept as id tuples into the store's own registries, in
    first-insertion order.
    """

    def __init__(self):
        self.entities = SymbolRegistry("entity")
        self.predicates = SymbolRegistry("predicate")
        self.times = SymbolRegistry("time")
        self._triples = {}
        self._quadruples = {}

    def add_triple(self, s, p, o):
        key = (self.entities.register(s), self.predicates.register(p), self.entities.register(o))
        self._triples.setdefault(key, None)
        return key

    def add_quadruple(self, s, p, o, t):
        key = (
            self.entities.register(s),
            self.predicates.register(p),
            self.entities.register(o),
            self.times.register(t),
        )
        self._quadruples.setdefault(key, None)
        return key

    @property
    def triples(self):
        return list(self._triples)

    @property
    def quadruples(self):
        return list(self._quadruples)

    def triple_names(self):
        e, p = self.entities.name, self.predicates.name
        return [(e(a), p(b), e(c)) for a, b, c in self._triples]

    def quadruple_names(self):
        e, p, t = self.entities.name, self.predicates.name, self.times.name
        return [(e(a), p(b), e(c), t(d)) for a, b, c, d in self._quadruples]

    def __len__(self):
        return len(self._triples) + len(self._quadruples)

    def __eq__(self, other):
        return (
            isinstance(other, FactStore)
            and self.entities.names == other.entities.names
            and self.predicates.names == other.predicates.names
            and self.times.names == other.times.names
            and self.triples == other.triples
            and self.quadruples == other.quadruples
        )


@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.05
    negatives: int = 5
    l2: float = 1e-4
    seed: int = 0
    nonnegative: bool = False
    batch_size: int = 8  # None: full batch
    decay: float = 0.0
    corrupt: tuple = None  # slots to corrupt; None: every slot of the model
    max_corrupt: int = 1  # each negative replaces 1..max_corrupt distinct slots

    def __post_init__(self):
        if self.epochs < 0 or self.negatives < 0 or self.l2 < 0 or self.decay < 0:
            raise ValueError("epochs, negatives, l2 and decay must be nonnegative")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.max_corrupt < 1:
            raise ValueError("max_corrupt must be positive")


@dataclass
class Gradients:
    """Core gradient plus sparse row gradients keyed by table kind."""

    core: np.ndarray
    rows: dict = field(default_factory=dict)  # kind -> (ids, grads)


@dataclass
class TrainReport:
    losses: list

    @property
    def final_loss(self):
        return self.losses[-1] if self.losses else float("nan")

    def jsonl(self):
        return "".join(
            json.dumps({"epoch": i + 1, "loss": loss}) + "\n" for i, loss in enumerate(self.losses)
        )


@dataclass
class MarginReport:
    held_out_mean: float
    negative_mean: float

    @property
    def margin(self):
        return self.held_out_mean - self.negative_mean


def _factor_matrices(model, facts):
    facts = np.asarray(facts, dtype=np.int64).reshape(-1, model.order)
    return [model.table(slot).matrix[facts[:, k]] for k, slot in enumerate(model.slots)], facts


def batch_scores(model, facts):
    """Vector of Tucker scores for an ``(n, order)`` array of id tuples."""
    factors, _ = _factor_matrices(model, facts)
    out = model.core.values
    # contract from the last mode so each step is a batched matvec
    out = np.tensordot(factors[-1], out, axes=([1], [model.order - 1]))
    for f in reversed(factors[:-1]):
        out = np.einsum("n...r,nr->n...", out, f)
    return out


def _leave_one(model, factors, mode):
    letters = "abcd"[: model.order]
    operands, inputs = [model.core.values], [letters]
    for k, f in enumerate(factors):
        if k != mode:
            operands.append(f)
            inputs.append("n" + letters[k])
    return np.einsum(",".join(inputs) + "->n" + letters[mode], *operands, optimize=True)


def loss_and_gradients(model, facts, labels, l2=0.0):
    """Loss and analytic gradients for a labelled batch.

    Parameters
    ----------
    model : SemanticModel or EpisodicModel
    facts : array_like, shape (n, order)
        Id tuples in slot order.
    labels : array_like, shape (n,)
        1 for observed facts, 0 for negatives.
    l2 : float
        Weight of the ``l2 / 2 * ||param||^2`` penalty on the core and
        on every embedding row referenced by the batch.

    Returns
    -------
    loss : float
    grads : Gradients
    """
    labels = np.asarray(labels, dtype=np.float64)
    factors, facts = _factor_matrices(model, facts)
    n = facts.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    theta = batch_scores(model, facts)
    # BCE via log-sigmoid: -y log sig(x) - (1-y) log sig(-x)
    loss = -np.mean(labels * log_expit(theta) + (1 - labels) * log_expit(-theta))
    delta = (expit(theta) - labels) / n

    letters = "abcd"[: model.order]
    core_grad = np.einsum(
        "n," + ",".join("n" + c for c in letters) + "->" + letters, delta, *factors, optimize=True
    )
    core_grad += l2 * model.core.values
    loss += 0.5 * l2 * float(np.sum(model.core.values ** 2))

    rows = {}
    for k, slot in enumerate(model.slots):
        table = model.table(slot)
        g = delta[:, None] * _leave_one(model, factors, k)
        ids, grads = rows.get(table.kind, (np.empty(0, np.int64), np.empty((0, model.rank))))
        rows[table.kind] = (np.concatenate([ids, facts[:, k]]), np.concatenate([grads, g]))
    for kind, (ids, grads) in rows.items():
        uniq, inverse = np.unique(ids, return_inverse=True)
        acc = np.zeros((len(uniq), model.rank))
        np.add.at(acc, inverse, grads)
        table = model.table(_slot_of(model, kind))
        params = table.matrix[uniq]
        acc += l2 * params
        loss += 0.5 * l2 * float(np.sum(params ** 2))
        rows[kind] = (uniq, acc)
    return float(loss), Gradients(core_grad, rows)


def _slot_of(model, kind):
    return {"entity": "subject", "predicate": "predicate", "time": "time"}[kind]


def _store_to_model_ids(model, store):
    """Translate the store's facts into ``model`` ids, registering missing names."""
    if isinstance(model, EpisodicModel):
        return [model.ids(f, register=True) for f in store.quadruple_names()]
    facts = store.triple_names() + [q[:3] for q in store.quadruple_names()]
    return list(dict.fromkeys(model.ids(f, register=True) for f in facts))


def _corrupt(model, positives, ratio, rng, known, slots, max_corrupt=1):
    if ratio == 0:
        return np.empty((0, model.order), dtype=np.int64)
    reps = np.repeat(positives, ratio, axis=0)
    modes = np.array([model.slots.index(s) for s in slots])
    if max_corrupt == 1:
        hit = modes[rng.integers(len(modes), size=len(reps))][:, None] == modes
    else:
        # corrupt the first k slots of a random permutation, k uniform in 1..max_corrupt
        k = rng.integers(1, min(max_corrupt, len(modes)) + 1, size=len(reps))
        hit = np.argsort(rng.random((len(reps), len(modes))), axis=1) < k[:, None]
    for j, m in enumerate(modes):
        size = len(model.table(model.slots[m]))
        replacement = rng.integers(size, size=len(reps))
        reps[:, m] = np.where(hit[:, j], replacement, reps[:, m])
    keep = np.array([tuple(r) not in known for r in reps.tolist()], dtype=bool)
    return reps[keep]


def _apply(model, grads, lr, project):
    model.core.values -= lr * grads.core
    for kind, (ids, g) in grads.rows.items():
        table = model.table(_slot_of(model, kind))
        table.matrix[ids] -= lr * g
        if project:
            table.matrix[ids] = np.maximum(table.matrix[ids], 0.0)
    if project:
        np.maximum(model.core.values, 0.0, out=model.core.values)


def fit(model, store, config, positives=None):
    """Stochastic gradient descent on ``store`` (or on explicit id tuples).

    ``positives``, when given, is a sequence of id tuples already in the
    model's id space and replaces ``store``. Returns a :class:`TrainReport`
    with the mean batch loss of every epoch.
    """
    if positives is None:
        positives = _store_to_model_ids(model, store)
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, model.order)
    if len(positives) == 0:
        raise ValueError("no facts to train on")
    known = set(map(tuple, positives.tolist()))
    rng = np.random.default_rng(config.seed)
    project = config.nonnegative or model.nonnegative
    slots = config.corrupt or model.slots
    unknown = set(slots) - set(model.slots)
    if unknown:
        raise ValueError(f"cannot corrupt slots {sorted(unknown)} of {type(model).__name__}")
    batch = config.batch_size or len(positives)
    losses = []
    for epoch in range(config.epochs):
        lr = config.learning_rate / (1.0 + config.decay * epoch)
        order = rng.permutation(len(positives))
        total, count = 0.0, 0
        for start in range(0, len(order), batch):
            pos = positives[order[start:start + batch]]
            neg = _corrupt(model, pos, config.negatives, rng, known, slots, config.max_corrupt)
            facts = np.concatenate([pos, neg])
            labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
            with np.errstate(over="ignore", invalid="ignore"):
                # a diverging run overflows before the loss turns NaN; reported below
                loss, grads = loss_and_gradients(model, facts, labels, config.l2)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became {loss} at epoch {epoch + 1}; lower the learning rate "
                    f"(currently {config.learning_rate}) or raise l2"
                )
            _apply(model, grads, lr, project)
            total += loss * len(pos)
            count += len(pos)
        losses.append(total / count)
        logger.debug("epoch %d loss %.6f", epoch + 1, losses[-1])
    return TrainReport(losses)


def evaluate_materialization(model, held_out, negatives=None, n_negatives=100, seed=0):
    """Mean score of held-out facts minus mean score of corruptions.

    ``held_out`` and ``negatives`` are id tuples in slot order. Without
    explicit negatives, ``n_negatives`` object corruptions of randomly
    chosen held-out facts are drawn.
    """
    held_out = np.asarray(held_out, dtype=np.int64).reshape(-1, model.order)
    if negatives is None:
        rng = np.random.default_rng(seed)
        negatives = held_out[rng.integers(len(held_out), size=n_negatives)].copy()
        negatives[:, 2] = rng.integers(len(model.entities), size=n_negatives)
    negatives = np.asarray(negatives, dtype=np.int64).reshape(-1, model.order)
    return MarginReport(
        float(np.mean(batch_scores(model, held_out))),
        float(np.mean(batch_scores(model, negatives))),
    )
