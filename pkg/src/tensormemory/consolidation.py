"""Deriving semantic memory from episodic memory.

Three routes are provided, plus a plain engram copy:

* :func:`marginalize_time` sums the episodic core over the latent vectors
  of a set of time indices. For nonnegative models the resulting order-3
  model scores every triple with the sum of its episodic scores.
* :func:`replay_teach` samples triples from the episodic model and fits
  the semantic model to them.
* :func:`distill_explicit` stores every triple above a probability
  threshold in an explicit, non-generalizing :class:`KnowledgeGraphStore`.
* :func:`copy_engrams` re-binds every (time index, trace) pair into a
  second episodic model.
"""

import numpy as np

from .errors import DimensionError, SignedModeError, VocabularyTooLargeError
from .memory_model import EpisodicModel, ModelConfig, SemanticModel, bind_engram, triple_probability
from .query_engine import Clamped, Fixed, FREE, SlotPattern, joint_distribution, sample_recall
from .tensor_core import CoreTensor
from .trainer import FactStore, TrainConfig, fit

__all__ = [
    "KnowledgeGraphStore",
    "absorb_time",
    "marginalize_time",
    "replay_teach",
    "semantic_like",
    "distill_explicit",
    "copy_engrams",
]

DISTILL_CAP = 1_000_000


class KnowledgeGraphStore:
    """Explicit set of named triples with a confidence in (0, 1].

    Re-inserting a triple keeps the higher confidence.
    """

    def __init__(self):
        self._facts = {}

    def add(self, s, p, o, confidence):
        confidence = float(confidence)
        if not 0.0 < confidence <= 1.0:
            raise ValueError(f"confidence must be in (0, 1], got {confidence}")
        key = (s, p, o)
        old = self._facts.get(key)
        if old is None or confidence > old:
            self._facts[key] = confidence
            return True
        return False

    def confidence(self, s, p, o):
        return self._facts.get((s, p, o))

    def __contains__(self, key):
        return tuple(key) in self._facts

    def __len__(self):
        return len(self._facts)

    def __iter__(self):
        for (s, p, o), c in sorted(self._facts.items()):
            yield s, p, o, c

    def to_tsv(self):
        return "".join(f"{s}\t{p}\t{o}\t{c!r}\n" for s, p, o, c in self)

    @classmethod
    def from_tsv(cls, text):
        store = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise ValueError(f"line {lineno}: expected 4 tab-separated columns, got {len(cols)}")
            store.add(cols[0], cols[1], cols[2], float(cols[3]))
        return store


def _require_nonnegative(model):
    if not model.nonnegative:
        raise SignedModeError(
            "time marginalization needs a nonnegative episodic model; signed scores do not "
            "sum out through the core"
        )


def absorb_time(semantic_core, episodic, t):
    """One marginalization step: add the episodic core contracted with ``a_t``.

    Updates ``semantic_core`` (a :class:`CoreTensor`) in place, so it can
    run once per perceived episode.
    """
    _require_nonnegative(episodic)
    a_t = episodic.times.row(t)
    semantic_core.values += episodic.core.values @ a_t
    return semantic_core


def marginalize_time(episodic, time_ids=None, normalize=False):
    """Semantic model whose core is the episodic core summed over ``time_ids``.

    Entity and predicate tables are shared with ``episodic`` by reference.
    With ``normalize`` the summed core is divided by ``len(time_ids)``.
    """
    _require_nonnegative(episodic)
    if time_ids is None:
        time_ids = range(len(episodic.times))
    time_ids = list(time_ids)
    if not time_ids:
        raise ValueError("time_ids is empty")
    core = CoreTensor.zeros(episodic.rank, 3)
    for t in time_ids:
        absorb_time(core, episodic, t)
    if normalize:
        core.values /= len(time_ids)
    return SemanticModel(episodic.config, episodic.entities, episodic.predicates, core)


def semantic_like(episodic, seed=None):
    """Fresh semantic model over copies of the episodic entity and predicate tables.

    The copies carry the same names and vectors but are independent
    arrays, so training the result leaves ``episodic`` untouched.
    """
    cfg = episodic.config
    config = ModelConfig(cfg.rank, cfg.nonnegative, cfg.beta_default,
                         cfg.seed if seed is None else seed, cfg.core_scale)
    return SemanticModel(config, episodic.entities.copy(), episodic.predicates.copy())


def replay_teach(episodic, semantic, schedule, samples_per_time=20, beta=None, train_config=None, seed=0):
    """Teach ``semantic`` with triples sampled from episodic recall.

    For each scheduled time id, ``samples_per_time`` triples are drawn
    from the episodic joint at inverse temperature ``beta``; all distinct
    draws become positives for one :func:`fit` call. The episodic model
    is only read.
    """
    schedule = list(schedule)
    if not schedule:
        raise ValueError("replay schedule is empty")
    for a, b in ((episodic.entities, semantic.entities), (episodic.predicates, semantic.predicates)):
        if a.registry.names != b.registry.names:
            raise ValueError(f"episodic and semantic {a.kind} registries differ; see semantic_like")
    if train_config is None:
        train_config = TrainConfig()
    store = FactStore()
    ss = np.random.SeedSequence(seed)
    for t, child in zip(schedule, ss.spawn(len(schedule))):
        draws = sample_recall(episodic, t, beta, samples_per_time, np.random.default_rng(child))
        for s, p, o in draws:
            store.add_triple(
                episodic.entities.name(s), episodic.predicates.name(p), episodic.entities.name(o)
            )
    return fit(semantic, store, train_config)


def distill_explicit(model, store, threshold=0.9, time=None, trace=None, cap=DISTILL_CAP):
    """Insert every triple with ``sig(theta) >= threshold`` into ``store``.

    For an episodic model pass either a time id (``time``) or a latent
    vector (``trace``). Returns the list of ``(s, p, o, confidence)``
    names that were inserted or raised in confidence.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    size = len(model.entities) ** 2 * len(model.predicates)
    if size > cap:
        raise VocabularyTooLargeError(
            f"{size} triples exceed the distillation cap of {cap}; distill from sampled recall instead"
        )
    if isinstance(model, EpisodicModel):
        if (time is None) == (trace is None):
            raise ValueError("episodic distillation needs exactly one of time or trace")
        spec = Fixed(time) if time is not None else Clamped(trace)
        pattern = SlotPattern(FREE, FREE, FREE, spec)
    else:
        pattern = SlotPattern(FREE, FREE, FREE)
    scores = joint_distribution(model, pattern, beta=0.0, max_tuples=cap).scores
    probs = triple_probability(scores)
    added = []
    for s, p, o in zip(*np.nonzero(probs >= threshold)):
        names = (model.entities.name(s), model.predicates.name(p), model.entities.name(o))
        conf = float(probs[s, p, o])
        if store.add(*names, conf):
            added.append((*names, conf))
    return added


def copy_engrams(source, target):
    """Bind every engram of ``source`` into ``target`` with the same label and trace."""
    if source.rank != target.rank:
        raise DimensionError(f"rank mismatch: source {source.rank}, target {target.rank}")
    count = 0
    for engram in source.engrams:
        bind_engram(target, engram.trace, label=engram.label)
        count += 1
    return count
