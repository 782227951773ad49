"""Fact files and model checkpoints.

Fact files are UTF-8 TSV with ``subject predicate object [time]`` per
line; blank lines and lines starting with ``#`` are skipped.

A checkpoint is one line of JSON (the header) followed by the raw
little-endian float64 arrays listed in ``header["arrays"]``, back to back
in that order. The header is written with sorted keys and no extra
whitespace, so saving the same model twice gives identical bytes.
"""

import json
from pathlib import Path

import numpy as np

from .errors import CheckpointError, CheckpointVersionError, ParseError
from .memory_model import EmbeddingTable, EpisodicModel, ModelConfig, SemanticModel
from .tensor_core import CoreTensor
from .trainer import FactStore

__all__ = ["ingest", "parse_facts", "save_checkpoint", "load_checkpoint", "checkpoint_bytes"]

FORMAT = "tensormemory-checkpoint"
VERSION = 1
_DTYPE = np.dtype("<f8")


def parse_facts(lines, store=None, source="<facts>"):
    store = FactStore() if store is None else store
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) not in (3, 4):
            raise ParseError(
                f"{source}:{lineno}: expected 3 or 4 tab-separated columns, got {len(cols)}", lineno
            )
        if any(not c for c in cols):
            raise ParseError(f"{source}:{lineno}: empty column", lineno)
        if len(cols) == 3:
            store.add_triple(*cols)
        else:
            store.add_quadruple(*cols)
    return store


def ingest(path, store=None):
    """Read a fact file into a (new or given) :class:`FactStore`."""
    with open(path, encoding="utf-8") as f:
        return parse_facts(f, store, source=str(path))


def _tables(model):
    tables = {"entity": model.entities, "predicate": model.predicates}
    if isinstance(model, EpisodicModel):
        tables["time"] = model.times
    return tables


def checkpoint_bytes(model):
    kind = "episodic" if isinstance(model, EpisodicModel) else "semantic"
    tables = _tables(model)
    arrays = [("core", model.core.values)] + [(k, t.matrix) for k, t in tables.items()]
    cfg = model.config
    header = {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind,
        "config": {
            "rank": cfg.rank,
            "nonnegative": cfg.nonnegative,
            "beta_default": cfg.beta_default,
            "seed": cfg.seed,
            "core_scale": cfg.core_scale,
        },
        "registries": {k: t.registry.names for k, t in tables.items()},
        "rng": {k: t.rng.bit_generator.state for k, t in tables.items()},
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in arrays],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"
    body = b"".join(np.ascontiguousarray(a, dtype=_DTYPE).tobytes() for _, a in arrays)
    return head + body


def save_checkpoint(model, path):
    Path(path).write_bytes(checkpoint_bytes(model))


def load_checkpoint(path):
    data = Path(path).read_bytes()
    return checkpoint_from_bytes(data, source=str(path))


def checkpoint_from_bytes(data, source="<bytes>"):
    end = data.find(b"\n")
    if end < 0:
        raise CheckpointError(f"{source}: missing checkpoint header")
    try:
        header = json.loads(data[:end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{source}: unreadable header ({exc})") from None
    if not isinstance(header, dict) or header.get("format") != FORMAT:
        raise CheckpointError(f"{source}: not a {FORMAT} file")
    if header.get("version") != VERSION:
        raise CheckpointVersionError(
            f"{source}: checkpoint version {header.get('version')} is not supported "
            f"(this build reads version {VERSION})"
        )
    body = memoryview(data)[end + 1:]
    specs = header["arrays"]
    expected = sum(int(np.prod(s["shape"])) for s in specs) * _DTYPE.itemsize
    if len(body) != expected:
        raise CheckpointError(
            f"{source}: payload is {len(body)} bytes but the header declares {expected}"
        )
    arrays, offset = {}, 0
    for spec in specs:
        n = int(np.prod(spec["shape"]))
        chunk = np.frombuffer(body, dtype=_DTYPE, count=n, offset=offset)
        arrays[spec["name"]] = chunk.astype(np.float64).reshape(spec["shape"])
        offset += n * _DTYPE.itemsize

    config = ModelConfig(**header["config"])
    tables = {}
    for kind, names in header["registries"].items():
        table = EmbeddingTable(kind, config.rank, config.nonnegative, np.random.default_rng())
        table.rng.bit_generator.state = header["rng"][kind]
        for name in names:
            table.registry.register(name)
        table.set_matrix(arrays[kind])
        tables[kind] = table
    core = CoreTensor(arrays["core"])
    if header["kind"] == "episodic":
        return EpisodicModel(config, tables["entity"], tables["predicate"], tables["time"], core)
    return SemanticModel(config, tables["entity"], tables["predicate"], core)
