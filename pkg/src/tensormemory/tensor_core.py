"""Dense multilinear kernels for order-3 and order-4 Tucker cores.

A Tucker score is the full n-mode vector product of a core tensor with
one latent vector per mode::

    f(a_1, ..., a_k) = sum_{r_1..r_k} a_1[r_1] ... a_k[r_k] g(r_1, ..., r_k)

All kernels here are pure functions over float64 arrays. The nested-loop
evaluators at the bottom are deliberately naive and exist to serve as
independent oracles for the vectorized paths.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

__all__ = [
    "CoreTensor",
    "contract",
    "contract3",
    "contract4",
    "contract_leave_one",
    "contract4_leave_one",
    "nested_loop_contract",
    "nested_loop_leave_one",
]


@dataclass
class CoreTensor:
    """Dense core tensor of shape ``(rank,) * order``, row-major, mode 1 slowest.

    Parameters
    ----------
    values : array_like
        Hypercubic array with 3 or 4 axes.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim not in (3, 4):
            raise DimensionError(f"core tensor must have order 3 or 4, got {values.ndim}")
        if len(set(values.shape)) != 1 or values.shape[0] < 1:
            raise DimensionError(f"core tensor must be hypercubic, got shape {values.shape}")
        self.values = values

    @property
    def order(self):
        return self.values.ndim

    @property
    def rank(self):
        return self.values.shape[0]

    def copy(self):
        return CoreTensor(self.values.copy())

    @classmethod
    def zeros(cls, rank, order):
        return cls(np.zeros((rank,) * order))

    @classmethod
    def superdiagonal(cls, rank, order, value=1.0):
        """Core with ``value`` where all indices coincide and zero elsewhere."""
        values = np.zeros((rank,) * order)
        idx = np.arange(rank)
        values[(idx,) * order] = value
        return cls(values)

    @classmethod
    def random(cls, rank, order, rng, low=-1.0, high=1.0):
        return cls(rng.uniform(low, high, size=(rank,) * order))

    def flat(self):
        """Row-major linearization (length ``rank ** order``)."""
        return self.values.reshape(-1)


def _as_vector(v, rank, mode):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != rank:
        raise DimensionError(
            f"mode {mode}: expected vector of length {rank}, got shape {v.shape}", mode=mode
        )
    return v


def _values(core):
    return core.values if isinstance(core, CoreTensor) else np.asarray(core, dtype=np.float64)


def contract(core, vectors):
    """Full contraction of ``core`` with one vector per mode.

    Modes are contracted from the last to the first, so the result is a
    plain Python float.
    """
    g = _values(core)
    if len(vectors) != g.ndim:
        raise DimensionError(f"need {g.ndim} vectors, got {len(vectors)}")
    rank = g.shape[0]
    vs = [_as_vector(v, rank, m + 1) for m, v in enumerate(vectors)]
    out = g
    for v in reversed(vs):
        out = out @ v
    return float(out)


def contract3(core, v1, v2, v3):
    if _values(core).ndim != 3:
        raise DimensionError("contract3 needs an order-3 core")
    return contract(core, (v1, v2, v3))


def contract4(core, v1, v2, v3, v4):
    if _values(core).ndim != 4:
        raise DimensionError("contract4 needs an order-4 core")
    return contract(core, (v1, v2, v3, v4))


def contract_leave_one(core, vectors, free_mode):
    """Contract every mode except ``free_mode`` (1-based).

    ``vectors`` has one entry per mode; the entry at ``free_mode`` is
    ignored and may be None. The returned vector ``h`` satisfies
    ``dot(v, h) == contract(core, vectors with v at free_mode)`` up to
    rounding.
    """
    g = _values(core)
    order = g.ndim
    if len(vectors) != order:
        raise DimensionError(f"need {order} vector slots, got {len(vectors)}")
    if not 1 <= free_mode <= order:
        raise DimensionError(f"free_mode must be in 1..{order}, got {free_mode}")
    rank = g.shape[0]
    out = np.moveaxis(g, free_mode - 1, 0)
    others = [
        _as_vector(v, rank, m + 1) for m, v in enumerate(vectors) if m != free_mode - 1
    ]
    for v in reversed(others):
        out = out @ v
    return np.ascontiguousarray(out)


def contract4_leave_one(core, fixed, free_mode):
    """Order-4 leave-one contraction; ``fixed`` holds the three other vectors in mode order."""
    if _values(core).ndim != 4:
        raise DimensionError("contract4_leave_one needs an order-4 core")
    if len(fixed) != 3:
        raise DimensionError(f"need 3 fixed vectors, got {len(fixed)}")
    slots = list(fixed)
    slots.insert(free_mode - 1, None)
    return contract_leave_one(core, slots, free_mode)


# -- reference evaluators -------------------------------------------------


def nested_loop_contract(core, vectors):
    """Explicit sum over every index tuple. Slow; for testing only."""
    g = _values(core)
    rank = g.shape[0]
    total = 0.0
    for idx in itertools.product(range(rank), repeat=g.ndim):
        term = float(g[idx])
        for m, r in enumerate(idx):
            term *= float(vectors[m][r])
        total += term
    return total


def nested_loop_leave_one(core, vectors, free_mode):
    g = _values(core)
    rank = g.shape[0]
    h = [0.0] * rank
    for idx in itertools.product(range(rank), repeat=g.ndim):
        term = float(g[idx])
        for m, r in enumerate(idx):
            if m != free_mode - 1:
                term *= float(vectors[m][r])
        h[idx[free_mode - 1]] += term
    return np.array(h)
