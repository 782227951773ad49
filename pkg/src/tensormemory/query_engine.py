"""Queries against a memory model: conditionals, marginals, recall and association.

A query fixes some slots and leaves one slot free. Each slot is filled
according to its spec before the core is contracted:

* ``Fixed(id)``    the symbol's latent vector
* ``Clamped(v)``   an arbitrary latent vector (e.g. a perceived trace)
* ``MARGINALIZED`` the sum of every latent vector of the slot's vocabulary,
  i.e. all-ones at the index layer; only meaningful for nonnegative models
* ``FREE``         left open; the core is contracted over all other modes
  into an activation ``h`` that is matched against every candidate

Candidates are scored by ``dot(a_c, h)`` and turned into probabilities
with ``exp(beta * score)``, or used as-is when ``beta == LINEAR``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .errors import PatternError, SignedModeError, UnknownSymbolError, VocabularyTooLargeError
from .tensor_core import contract_leave_one

__all__ = [
    "Fixed",
    "Clamped",
    "FREE",
    "MARGINALIZED",
    "LINEAR",
    "SlotPattern",
    "QueryResult",
    "JointResult",
    "conditional_distribution",
    "marginal_distribution",
    "sample",
    "joint_distribution",
    "sample_joint",
    "recall",
    "sample_recall",
    "decode",
    "entity_profile",
    "associate",
]

LINEAR = "linear"
MAX_TUPLES = 1_000_000


@dataclass(frozen=True)
class Fixed:
    id: int


@dataclass(frozen=True, eq=False)
class Clamped:
    vector: np.ndarray


class _Free:
    def __repr__(self):
        return "FREE"


class _Marginalized:
    def __repr__(self):
        return "MARGINALIZED"


FREE = _Free()
MARGINALIZED = _Marginalized()


@dataclass
class SlotPattern:
    """Per-slot query spec. ``time`` must be None for semantic models."""

    subject: object = FREE
    predicate: object = FREE
    object: object = FREE
    time: object = None

    def specs(self, model):
        names = model.slots
        if len(names) == 3 and self.time is not None:
            raise PatternError("semantic models have no time slot")
        if len(names) == 4 and self.time is None:
            raise PatternError("episodic queries need a time slot spec")
        return [(slot, getattr(self, slot)) for slot in names]

    def free_slots(self, model):
        return [slot for slot, spec in self.specs(model) if spec is FREE]


@dataclass
class QueryResult:
    slot: str
    candidates: np.ndarray
    scores: np.ndarray
    probabilities: np.ndarray
    beta: object

    def top(self, k=None):
        """``(id, probability)`` pairs, most probable first, ties to the lower id."""
        order = np.argsort(-self.probabilities, kind="stable")[:k]
        return [(int(self.candidates[i]), float(self.probabilities[i])) for i in order]


@dataclass
class JointResult:
    """Enumerated joint over several free slots; arrays are indexed by ids in slot order."""

    slots: tuple
    scores: np.ndarray
    probabilities: np.ndarray
    beta: object

    def top(self, k=None):
        flat = self.probabilities.reshape(-1)
        order = np.argsort(-flat, kind="stable")[:k]
        out = []
        for i in order:
            ids = tuple(int(x) for x in np.unravel_index(i, self.probabilities.shape))
            out.append((ids, float(flat[i])))
        return out


def _resolve_beta(model, beta):
    if beta is None:
        beta = model.config.beta_default
    if isinstance(beta, str):
        if beta != LINEAR:
            raise ValueError(f"beta must be a number or {LINEAR!r}, got {beta!r}")
        if not model.nonnegative:
            raise SignedModeError("linear scoring needs a nonnegative model")
        return beta
    beta = float(beta)
    if not beta >= 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    return beta


def _normalize(scores, beta):
    if beta == LINEAR:
        total = scores.sum()
        if not total > 0:
            raise ValueError("all candidate scores are zero; linear normalization undefined")
        return scores / total
    return softmax(beta * scores)


def _slot_vector(model, slot, spec):
    table = model.table(slot)
    if isinstance(spec, Fixed):
        return table.row(spec.id)
    if isinstance(spec, Clamped):
        v = np.asarray(spec.vector, dtype=np.float64)
        if v.shape != (model.rank,):
            raise PatternError(f"clamped {slot} vector must have length {model.rank}, got shape {v.shape}")
        return v
    if spec is MARGINALIZED:
        if not model.nonnegative:
            raise SignedModeError(
                f"cannot marginalize {slot}: summing out a slot with a vector of ones is "
                "only exact for nonnegative (sum-product) models"
            )
        return table.matrix.sum(axis=0)
    raise PatternError(f"unrecognized spec for {slot}: {spec!r}")


def conditional_distribution(model, pattern, beta=None):
    """Distribution over the single free slot given the rest of ``pattern``."""
    beta = _resolve_beta(model, beta)
    specs = pattern.specs(model)
    free = [i for i, (_, spec) in enumerate(specs) if spec is FREE]
    if len(free) != 1:
        raise PatternError(f"expected exactly one free slot, got {len(free)}")
    free_mode = free[0] + 1
    free_slot = specs[free[0]][0]
    vectors = [None if spec is FREE else _slot_vector(model, slot, spec) for slot, spec in specs]
    h = contract_leave_one(model.core, vectors, free_mode)
    table = model.table(free_slot)
    if len(table) == 0:
        raise UnknownSymbolError(f"{free_slot} vocabulary is empty")
    scores = table.matrix @ h
    return QueryResult(free_slot, np.arange(len(table)), scores, _normalize(scores, beta), beta)


def marginal_distribution(model, pattern, beta=LINEAR):
    """Like :func:`conditional_distribution` but with at least one slot summed out.

    Requires a nonnegative model and linear scoring, where the result is
    an exact marginal of the unnormalized joint.
    """
    if not model.nonnegative:
        raise SignedModeError(
            "marginal_distribution needs a nonnegative model; with signed parameters the "
            "ones-vector substitution does not sum out a slot"
        )
    if beta != LINEAR:
        raise ValueError("marginal_distribution only supports linear scoring")
    if not any(spec is MARGINALIZED for _, spec in pattern.specs(model)):
        raise PatternError("pattern has no marginalized slot")
    return conditional_distribution(model, pattern, LINEAR)


def sample(model, pattern, beta=None, n=1, seed=None):
    """Draw ``n`` i.i.d. ids of the free slot."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    result = conditional_distribution(model, pattern, beta)
    rng = np.random.default_rng(seed)
    return [int(x) for x in rng.choice(result.candidates, size=n, p=result.probabilities)]


def joint_distribution(model, pattern, beta=None, max_tuples=MAX_TUPLES):
    """Enumerate all combinations of the free slots in ``pattern``."""
    beta = _resolve_beta(model, beta)
    specs = pattern.specs(model)
    free = [slot for slot, spec in specs if spec is FREE]
    if not free:
        raise PatternError("joint query needs at least one free slot")
    size = 1
    for slot in free:
        size *= len(model.table(slot))
    if size == 0:
        raise UnknownSymbolError("a free slot has an empty vocabulary")
    if size > max_tuples:
        raise VocabularyTooLargeError(
            f"{size} candidate tuples exceed the cap of {max_tuples}; use sample_joint instead"
        )
    letters = "abcd"
    operands = [model.core.values]
    inputs = [letters[: len(specs)]]
    output = ""
    for k, (slot, spec) in enumerate(specs):
        if spec is FREE:
            operands.append(model.table(slot).matrix)
            inputs.append("wxyz"[k] + letters[k])
            output += "wxyz"[k]
        else:
            operands.append(_slot_vector(model, slot, spec))
            inputs.append(letters[k])
    scores = np.einsum(",".join(inputs) + "->" + output, *operands, optimize=True)
    probs = _normalize(scores.reshape(-1), beta).reshape(scores.shape)
    return JointResult(tuple(free), scores, probs, beta)


def sample_joint(model, pattern, beta=None, n=1, seed=None):
    """Draw ``n`` tuples over the free slots by chained single-slot conditionals.

    Free slots are sampled in slot order (subject, predicate, object,
    time), each conditioned on the ones already drawn and marginalized
    over the ones still open. Under linear scoring every step is a
    :func:`conditional_distribution` call with the later slots
    MARGINALIZED. Under softmax scoring the per-step marginals of
    ``exp(beta * score)`` are not multilinear, so they are summed from
    the enumerated joint instead.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    beta = _resolve_beta(model, beta)
    rng = np.random.default_rng(seed)
    free = pattern.free_slots(model)
    if not free:
        raise PatternError("joint sampling needs at least one free slot")
    draws = []
    if beta == LINEAR:
        for _ in range(n):
            chosen = {}
            for k, slot in enumerate(free):
                fields = {s: getattr(pattern, s) for s in ("subject", "predicate", "object", "time")}
                for s, i in chosen.items():
                    fields[s] = Fixed(i)
                for s in free[k + 1:]:
                    fields[s] = MARGINALIZED
                step = conditional_distribution(model, SlotPattern(**fields), LINEAR)
                chosen[slot] = int(rng.choice(step.candidates, p=step.probabilities))
            draws.append(tuple(chosen[s] for s in free))
        return draws
    joint = joint_distribution(model, pattern, beta).probabilities
    for _ in range(n):
        p = joint
        ids = []
        for _k in range(len(free)):
            marginal = p.reshape(p.shape[0], -1).sum(axis=1)
            i = int(rng.choice(len(marginal), p=marginal / marginal.sum()))
            ids.append(i)
            p = p[i]
        draws.append(tuple(ids))
    return draws


def recall(model, t, beta=None, top_k=10, max_tuples=MAX_TUPLES):
    """Most probable ``((s, p, o), probability)`` triples of episode ``t``."""
    model.times.row(t)
    pattern = SlotPattern(FREE, FREE, FREE, Fixed(t))
    return joint_distribution(model, pattern, beta, max_tuples).top(top_k)


def sample_recall(model, t, beta=None, n=1, seed=None):
    model.times.row(t)
    return sample_joint(model, SlotPattern(FREE, FREE, FREE, Fixed(t)), beta, n, seed)


def decode(model, h, beta=None, top_k=10, max_tuples=MAX_TUPLES):
    """Rank triples with the time slot clamped to the latent vector ``h``."""
    pattern = SlotPattern(FREE, FREE, FREE, Clamped(h))
    return joint_distribution(model, pattern, beta, max_tuples).top(top_k)


def entity_profile(model, i, beta=None, top_k=10, max_tuples=MAX_TUPLES):
    """Most probable ``((p, o), probability)`` pairs with subject fixed to ``i``."""
    model.entities.row(i)
    pattern = SlotPattern(Fixed(i), FREE, FREE)
    return joint_distribution(model, pattern, beta, max_tuples).top(top_k)


def associate(table, i, k=5):
    """Top-``k`` symbols by cosine similarity to symbol ``i`` (excluding ``i``).

    Rows with zero norm have similarity 0 to everything.
    """
    n = len(table)
    target = table.row(i)
    if not 0 <= k <= n:
        raise ValueError(f"k must be in 0..{n}, got {k}")
    m = table.matrix
    norms = np.linalg.norm(m, axis=1)
    tnorm = np.linalg.norm(target)
    dots = m @ target
    denom = norms * tnorm
    sims = np.divide(dots, denom, out=np.zeros(n), where=denom > 0)
    order = [j for j in np.argsort(-sims, kind="stable") if j != i]
    return [(int(j), float(sims[j])) for j in order[:k]]
