"""Embedding tables for registered symbols and the two Tucker memory models built on them.

The semantic model scores triples ``(s, p, o)`` with an order-3 core, the
episodic model scores quadruples ``(s, p, o, t)`` with an order-4 core.
Subjects and objects share one entity table. An engram is a time index
together with its latent vector; binding a new engram appends a row to
the time table and never overwrites an existing one.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DimensionError, UnknownSymbolError
from .tensor_core import CoreTensor, contract3, contract4

__all__ = [
    "ModelConfig",
    "SymbolRegistry",
    "EmbeddingTable",
    "Engram",
    "SemanticModel",
    "EpisodicModel",
    "register_symbol",
    "score_semantic",
    "score_episodic",
    "triple_probability",
    "bind_engram",
    "rescal_contract",
]

ENTITY, PREDICATE, TIME = "entity", "predicate", "time"
_STREAM = {ENTITY: 0, PREDICATE: 1, TIME: 2, "core": 3}

INIT_SCALE = 0.1


@dataclass
class ModelConfig:
    """Hyperparameters shared by both memory models.

    Embeddings are drawn from ``[-0.1, 0.1]`` (``[0, 0.1]`` when
    ``nonnegative``). ``core_scale`` bounds the uniform core init; the
    default ``None`` uses ``10**(k-1) / rank**((k-1)/2)`` for an order-k
    core, which keeps initial scores small while giving every factor an
    O(1) gradient. With a unit-scale core the model starts near the
    saddle at zero and plain SGD barely moves.
    """

    rank: int
    nonnegative: bool = False
    beta_default: float = 5.0
    seed: int = 0
    core_scale: float = None

    def __post_init__(self):
        if int(self.rank) < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if not self.beta_default >= 0:
            raise ValueError(f"beta_default must be >= 0, got {self.beta_default}")
        self.rank = int(self.rank)

    def core_bound(self, order):
        if self.core_scale is not None:
            return float(self.core_scale)
        return (1.0 / INIT_SCALE) ** (order - 1) / self.rank ** ((order - 1) / 2)

    def rng(self, stream):
        return np.random.default_rng(np.random.SeedSequence([int(self.seed), _STREAM[stream]]))


class SymbolRegistry:
    """Bijection between symbol names and dense integer ids."""

    def __init__(self, kind, names=()):
        self.kind = kind
        self._names = []
        self._ids = {}
        for name in names:
            self.register(name)

    def register(self, name):
        if not isinstance(name, str) or not name:
            raise ValueError(f"{self.kind} name must be a nonempty string, got {name!r}")
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._names.append(name)
            self._ids[name] = idx
        return idx

    def id(self, name):
        try:
            return self._ids[name]
        except KeyError:
            raise UnknownSymbolError(f"unknown {self.kind} {name!r}") from None

    def name(self, idx):
        if not 0 <= idx < len(self._names):
            raise UnknownSymbolError(f"unknown {self.kind} id {idx}")
        return self._names[idx]

    def __contains__(self, name):
        return name in self._ids

    def __len__(self):
        return len(self._names)

    @property
    def names(self):
        return list(self._names)

    @property
    def next_id(self):
        return len(self._names)


class EmbeddingTable:
    """Registry plus a ``(num_symbols, rank)`` matrix of latent vectors.

    New rows are initialized i.i.d. uniform from the table's own seeded
    generator, so registration order fully determines the parameters.
    """

    def __init__(self, kind, rank, nonnegative=False, rng=None):
        self.kind = kind
        self.rank = int(rank)
        self.nonnegative = nonnegative
        self.registry = SymbolRegistry(kind)
        self.rng = rng if rng is not None else np.random.default_rng()
        self._data = np.zeros((4, self.rank))

    @property
    def matrix(self):
        """View of the live rows; in-place edits update the table."""
        return self._data[: len(self.registry)]

    def __len__(self):
        return len(self.registry)

    def _grow(self):
        new = np.zeros((2 * self._data.shape[0], self.rank))
        new[: len(self.registry)] = self.matrix
        self._data = new

    def register(self, name, vector=None):
        """Return the id of ``name``, appending a row if it is new.

        ``vector`` (only used for new names) sets the row exactly instead
        of drawing a random one.
        """
        if name in self.registry:
            return self.registry.id(name)
        if vector is not None:
            vector = self.check_vector(vector)
        if len(self.registry) >= self._data.shape[0]:
            self._grow()
        idx = self.registry.register(name)
        if vector is None:
            low = 0.0 if self.nonnegative else -INIT_SCALE
            vector = self.rng.uniform(low, INIT_SCALE, size=self.rank)
        self._data[idx] = vector
        return idx

    def check_vector(self, vector):
        v = np.asarray(vector, dtype=np.float64)
        if v.shape != (self.rank,):
            raise DimensionError(f"{self.kind} vector must have length {self.rank}, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{self.kind} vector has non-finite entries")
        if self.nonnegative and np.any(v < 0):
            raise ValueError(f"{self.kind} vector has negative entries but the model is nonnegative")
        return v

    def row(self, idx):
        if not 0 <= idx < len(self.registry):
            raise UnknownSymbolError(f"unknown {self.kind} id {idx}")
        return self._data[idx]

    def id(self, name):
        return self.registry.id(name)

    def name(self, idx):
        return self.registry.name(idx)

    def set_matrix(self, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (len(self.registry), self.rank):
            raise DimensionError(f"expected shape {(len(self.registry), self.rank)}, got {matrix.shape}")
        self._data = np.zeros((max(4, matrix.shape[0]), self.rank))
        self._data[: matrix.shape[0]] = matrix

    def copy(self):
        out = EmbeddingTable(self.kind, self.rank, self.nonnegative, rng=np.random.default_rng())
        out.rng.bit_generator.state = self.rng.bit_generator.state
        for name in self.registry.names:
            out.registry.register(name)
        out.set_matrix(self.matrix.copy())
        return out


def register_symbol(table, name):
    return table.register(name)


@dataclass(frozen=True)
class Engram:
    """A stored memory trace: time index plus its latent vector."""

    time_id: int
    trace: np.ndarray = field(repr=False)
    label: str = ""


class _TuckerModel:
    slots = ()
    order = 0

    def __init__(self, config, entities=None, predicates=None, core=None):
        self.config = config
        rank = config.rank
        self.entities = entities if entities is not None else self._new_table(ENTITY)
        self.predicates = predicates if predicates is not None else self._new_table(PREDICATE)
        if core is None:
            bound = config.core_bound(self.order)
            low = 0.0 if config.nonnegative else -bound
            core = CoreTensor.random(rank, self.order, config.rng("core"), low, bound)
        self.core = core
        if self.core.rank != rank or self.core.order != self.order:
            raise DimensionError(
                f"core must have rank {rank} and order {self.order}, got "
                f"rank {self.core.rank} order {self.core.order}"
            )
        for table in (self.entities, self.predicates):
            if table.rank != rank:
                raise DimensionError(f"{table.kind} table width {table.rank} != rank {rank}")

    def _new_table(self, kind):
        return EmbeddingTable(kind, self.config.rank, self.config.nonnegative, self.config.rng(kind))

    @property
    def rank(self):
        return self.config.rank

    @property
    def nonnegative(self):
        return self.config.nonnegative

    def table(self, slot):
        """Embedding table backing a slot name (``subject``, ``predicate``, ...)."""
        if slot in ("subject", "object"):
            return self.entities
        if slot == "predicate":
            return self.predicates
        if slot == "time" and "time" in self.slots:
            return self.times
        raise KeyError(f"{type(self).__name__} has no slot {slot!r}")

    def tables(self):
        return [self.table(slot) for slot in self.slots]

    def ids(self, names, register=False):
        """Map a tuple of names (in slot order) to ids."""
        if len(names) != len(self.slots):
            raise ValueError(f"expected {len(self.slots)} names, got {len(names)}")
        if register:
            return tuple(self.table(s).register(n) for s, n in zip(self.slots, names))
        return tuple(self.table(s).id(n) for s, n in zip(self.slots, names))

    def vectors(self, ids):
        return [self.table(s).row(i) for s, i in zip(self.slots, ids)]

    def probability(self, *ids):
        return triple_probability(self.score(*ids))

    def is_nonnegative(self):
        arrays = [self.core.values] + [t.matrix for t in self.tables()]
        return all(np.all(a >= 0) for a in arrays)

    def project_nonnegative(self):
        np.maximum(self.core.values, 0.0, out=self.core.values)
        for table in {id(t): t for t in self.tables()}.values():
            np.maximum(table.matrix, 0.0, out=table.matrix)


class SemanticModel(_TuckerModel):
    """Order-3 Tucker model over (subject, predicate, object)."""

    slots = ("subject", "predicate", "object")
    order = 3

    def score(self, s, p, o):
        return score_semantic(self, s, p, o)


class EpisodicModel(_TuckerModel):
    """Order-4 Tucker model over (subject, predicate, object, time).

    The time table doubles as the engram store.
    """

    slots = ("subject", "predicate", "object", "time")
    order = 4

    def __init__(self, config, entities=None, predicates=None, times=None, core=None):
        super().__init__(config, entities, predicates, core)
        self.times = times if times is not None else self._new_table(TIME)
        if self.times.rank != config.rank:
            raise DimensionError(f"time table width {self.times.rank} != rank {config.rank}")

    def score(self, s, p, o, t):
        return score_episodic(self, s, p, o, t)

    def engram(self, t):
        return Engram(t, self.times.row(t).copy(), self.times.name(t))

    @property
    def engrams(self):
        return [self.engram(t) for t in range(len(self.times))]


def score_semantic(model, s, p, o):
    return contract3(model.core, model.entities.row(s), model.predicates.row(p), model.entities.row(o))


def score_episodic(model, s, p, o, t):
    return contract4(
        model.core,
        model.entities.row(s),
        model.predicates.row(p),
        model.entities.row(o),
        model.times.row(t),
    )


def triple_probability(theta):
    """Logistic link ``1 / (1 + exp(-theta))``."""
    return expit(theta)


def bind_engram(model, h, label=None):
    """Form a new time index whose latent vector is exactly ``h``.

    Always creates a fresh time id; passing a ``label`` that is already
    registered is an error rather than an overwrite.
    """
    times = model.times
    h = times.check_vector(h)
    if label is None:
        n = len(times)
        label = f"t{n}"
        while label in times.registry:
            n += 1
            label = f"t{n}"
    elif label in times.registry:
        raise ValueError(f"time label {label!r} already bound; engrams are never overwritten")
    t = times.register(label, vector=h)
    return Engram(t, times.row(t).copy(), label)


def rescal_contract(predicate_slice, a_s):
    """Object activation ``G_p @ a_s`` of a RESCAL-style bilinear model."""
    g = np.asarray(predicate_slice, dtype=np.float64)
    a = np.asarray(a_s, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DimensionError(f"predicate slice must be square, got shape {g.shape}")
    if a.shape != (g.shape[1],):
        raise DimensionError(f"subject vector must have length {g.shape[1]}, got shape {a.shape}", mode=1)
    return g @ a
