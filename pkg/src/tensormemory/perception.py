"""Sensory encoding and perception.

An :class:`Encoder` maps a sensory vector ``u`` to a latent trace ``h``.
:func:`perceive` decodes ``h`` into triples by clamping it into the
time slot of an episodic model. A memorable input is also stored as a
new engram.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParseError, VocabularyTooLargeError
from .memory_model import bind_engram
from .query_engine import MAX_TUPLES, Clamped, FREE, SlotPattern, decode, sample_joint

__all__ = ["Encoder", "encode", "perceive", "read_sensory"]

_SQUASH = {
    "tanh": np.tanh,
    "sigmoid": lambda x: 1.0 / (1.0 + np.exp(-x)),
}


@dataclass
class Encoder:
    """Sensory encoder.

    ``kind`` is ``"identity"``, ``"affine"`` (``W1 @ u + b1``) or
    ``"mlp"`` (``W2 @ squash(W1 @ u + b1) + b2``). With ``nonnegative``
    the output passes through ``max(., 0)``.
    """

    kind: str
    input_dim: int
    output_dim: int
    W1: np.ndarray = None
    b1: np.ndarray = None
    W2: np.ndarray = None
    b2: np.ndarray = None
    squash: str = "tanh"
    nonnegative: bool = False

    def __post_init__(self):
        if self.kind == "identity":
            if self.input_dim != self.output_dim:
                raise DimensionError("identity encoder needs input_dim == output_dim")
            return
        if self.kind not in ("affine", "mlp"):
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.squash not in _SQUASH:
            raise ValueError(f"unknown squash {self.squash!r}")
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        hidden = self.output_dim if self.kind == "affine" else self.W1.shape[0]
        if self.W1.shape != (hidden, self.input_dim) or self.b1.shape != (hidden,):
            raise DimensionError(f"W1/b1 shapes {self.W1.shape}/{self.b1.shape} inconsistent")
        if self.kind == "mlp":
            self.W2 = np.asarray(self.W2, dtype=np.float64)
            self.b2 = np.asarray(self.b2, dtype=np.float64)
            if self.W2.shape != (self.output_dim, hidden) or self.b2.shape != (self.output_dim,):
                raise DimensionError(f"W2/b2 shapes {self.W2.shape}/{self.b2.shape} inconsistent")

    @classmethod
    def identity(cls, dim, nonnegative=False):
        return cls("identity", dim, dim, nonnegative=nonnegative)

    @classmethod
    def random_mlp(cls, input_dim, output_dim, hidden, seed=0, squash="tanh", nonnegative=False):
        rng = np.random.default_rng(seed)
        return cls(
            "mlp",
            input_dim,
            output_dim,
            W1=rng.normal(0, 1 / np.sqrt(input_dim), (hidden, input_dim)),
            b1=np.zeros(hidden),
            W2=rng.normal(0, 1 / np.sqrt(hidden), (output_dim, hidden)),
            b2=np.zeros(output_dim),
            squash=squash,
            nonnegative=nonnegative,
        )

    def to_dict(self):
        d = {"kind": self.kind, "input_dim": self.input_dim, "output_dim": self.output_dim,
             "squash": self.squash, "nonnegative": self.nonnegative}
        for name in ("W1", "b1", "W2", "b2"):
            value = getattr(self, name)
            if value is not None:
                d[name] = np.asarray(value).tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def encode(enc, u):
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (enc.input_dim,):
        raise DimensionError(f"sensory vector must have length {enc.input_dim}, got shape {u.shape}")
    if enc.kind == "identity":
        h = u.copy()
    elif enc.kind == "affine":
        h = enc.W1 @ u + enc.b1
    else:
        h = enc.W2 @ _SQUASH[enc.squash](enc.W1 @ u + enc.b1) + enc.b2
    if enc.nonnegative:
        h = np.maximum(h, 0.0)
    return h


def perceive(enc, model, u, memorable=False, beta=None, top_k=10, fallback_samples=None, seed=None,
             max_tuples=MAX_TUPLES):
    """Decode the trace of ``u``; memorable inputs are bound as engrams first.

    Returns ``(engram_or_None, decoded)`` where ``decoded`` is a list of
    ``((s, p, o), probability)``. When the vocabulary product exceeds the
    enumeration cap and ``fallback_samples`` is set, the decoding is
    replaced by that many chained samples with probability None.
    """
    if enc.output_dim != model.rank:
        raise DimensionError(f"encoder output {enc.output_dim} != model rank {model.rank}")
    h = encode(enc, u)
    engram = bind_engram(model, h) if memorable else None
    try:
        decoded = decode(model, h, beta, top_k, max_tuples)
    except VocabularyTooLargeError:
        if not fallback_samples:
            raise
        pattern = SlotPattern(FREE, FREE, FREE, Clamped(h))
        draws = sample_joint(model, pattern, beta, fallback_samples, seed)
        decoded = [(d, None) for d in draws]
    return engram, decoded


def read_sensory(path):
    """One comma-separated vector per nonblank line."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append(np.array([float(x) for x in line.split(",")]))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}", lineno) from None
    return rows
